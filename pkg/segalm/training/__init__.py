"""
Masking, optimization, pretraining, fine-tuning, gradient checking and probing.
"""
