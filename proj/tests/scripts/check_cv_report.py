"""Validate `coiner evaluate --json` output against the report schema."""
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema


def run(cli, *args):
    return subprocess.run([cli, *args], check=True, capture_output=True, text=True).stdout


def main():
    cli, root = sys.argv[1], Path(sys.argv[2])
    schema = json.loads((root / "schemas" / "cv_report.schema.json").read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)
    with tempfile.TemporaryDirectory() as tmp:
        corpus = Path(tmp) / "synth.jsonl"
        run(cli, "synth", "-o", str(corpus), "--per-class", "12")
        cases = [
            (str(corpus), ["-k", "4"]),
            (str(corpus), ["-k", "3", "--granularity", "two", "--family", "LinearSVM"]),
            (str(root / "data" / "mini_corpus.jsonl"), ["-k", "5", "--family", "KNN", "-p", "k=3"]),
        ]
        failures = 0
        for path, extra in cases:
            report = json.loads(run(cli, "evaluate", "-c", path, "--json", *extra))
            errors = sorted(validator.iter_errors(report), key=lambda e: list(e.path))
            for e in errors:
                print(f"{' '.join(extra)}: {list(e.path)}: {e.message}")
            failures += len(errors)
            print(f"{' '.join(extra)}: {'ok' if not errors else 'invalid'}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
