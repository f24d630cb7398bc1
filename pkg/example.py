"""
Example usage of segalm: a synthetic corpus pretrained for a few steps.
"""
import json
import os

from config.run_config import RunConfig
from config.settings import get_settings
from core.commands import cmd_gradcheck, cmd_pretrain, cmd_segment
from core.logging_config import setup_logging
from segalm import position_param_count
from segalm.data.synthetic import write_synthetic
from segalm.model.embeddings import PositionScheme


def main():
    settings = get_settings()
    setup_logging(settings.LOG_DIR)
    work_dir = os.getenv("SEGALM_EXAMPLE_DIR", "runs/example")

    # Vocab and a corpus of generated documents
    print("Writing synthetic corpus...")
    vocab_path, corpus_path = write_synthetic(work_dir, n_documents=200, seed=0)
    print(f"  vocab:  {vocab_path}")
    print(f"  corpus: {corpus_path}")
    print()

    print("Segmenting...")
    examples_path = os.path.join(work_dir, "examples.bin")
    stats = cmd_segment(corpus_path, vocab_path, examples_path, max_len=64)
    print(f"Packed {stats['documents']} documents ({stats['tokens']} tokens) into {stats['examples']} examples")
    print()

    # Position parameters per scheme at BERT-base width
    for scheme in PositionScheme:
        print(f"  {scheme.value:>9}: {position_param_count(scheme, 768):,} position parameters")
    print()

    config = RunConfig(
        scheme=PositionScheme.SEGA,
        preset="toy",
        vocab_path=str(vocab_path),
        examples_path=examples_path,
        out_dir=os.path.join(work_dir, "pretrain"),
        total_steps=50,
        batch_size=8,
        max_len=64,
        max_paragraphs=8,
        max_sentences=16,
        max_tokens_per_sentence=64,
        checkpoint_every=25,
    )

    print("Gradient check...")
    report = cmd_gradcheck(config.model_copy(update={"out_dir": os.path.join(work_dir, "gradcheck")}))
    print(f"Passed: {report.passed}")
    print(json.dumps(report.to_dict()["groups"][:2], indent=2))
    print()

    print(f"Pretraining for {config.total_steps} steps...")
    checkpoint = cmd_pretrain(config, resume=False, show_progress=True)
    print(f"Checkpoint: {checkpoint}")

    # Fine-tuning and probing take task files / a checkpoint:
    # segalm finetune --checkpoint runs/example/pretrain/checkpoints/step-0000050 \
    #     --train train.jsonl --dev dev.jsonl --vocab runs/example/vocab.txt --task classification
    # segalm probe runs/example/pretrain/checkpoints/step-0000050 runs/example/examples.bin --layer 0


if __name__ == "__main__":
    main()
