"""Regenerate the golden corpus evaluation report used by the test suite"""
import sys
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.append(str(project_root))

from config.settings import RunConfig
from evaluation.corpus import evaluate_corpus, report_to_json
from services.generator_service import MockBackend
from utils.logging_config import setup_logging

CORPUS_DIR = project_root / "corpus"
GOLDEN_PATH = project_root / "tests" / "golden" / "eval_report.json"


def refresh_golden():
    """Evaluate the bundled corpus with the mock backend and overwrite the golden file"""
    setup_logging("WARNING")
    print("📊 Evaluating bundled corpus...")

    report = evaluate_corpus(CORPUS_DIR, lambda sample: MockBackend(sample.fixtures_dir), RunConfig())
    text = report_to_json(report)

    previous = GOLDEN_PATH.read_text(encoding="utf-8") if GOLDEN_PATH.is_file() else None
    if previous == text:
        print("✅ Golden report unchanged")
        return

    GOLDEN_PATH.parent.mkdir(parents=True, exist_ok=True)
    GOLDEN_PATH.write_text(text, encoding="utf-8")
    print(f"✅ Golden report written to {GOLDEN_PATH}")

if __name__ == "__main__":
    refresh_golden()
