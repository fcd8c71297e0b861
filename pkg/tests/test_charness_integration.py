"""Drives the external C harness against an emitted header (criterion 11).

Skipped when no C compiler or harness source is available; the charness
package's own test suite covers the same contract from the other side.
"""

import shutil
import subprocess
from pathlib import Path

import pytest

from tagwise.cart import TrainConfig, fit
from tagwise.codegen import EmitOptions, ValueKind, emit_eval_vectors, emit_header
from tagwise.evaluation import split

HARNESS_C = Path(__file__).resolve().parent.parent / "charness" / "harness.c"

pytestmark = pytest.mark.skipif(
    shutil.which("cc") is None or not HARNESS_C.exists(),
    reason="requires a C compiler and the charness source",
)


def run_harness(tmp_path, header_text, vectors_text, symbol):
    header = tmp_path / "model.h"
    header.write_text(header_text)
    vectors = tmp_path / "vectors.csv"
    vectors.write_text(vectors_text)
    binary = tmp_path / "harness"
    build = subprocess.run(
        [
            "cc", "-O2", "-o", str(binary), str(HARNESS_C),
            f'-DCLASSIFIER_HEADER="{header}"',
            f"-DCLASSIFIER_SYM={symbol}",
            f"-DCLASSIFIER_SYM_UPPER={symbol.upper()}",
            "-lm",
        ],
        capture_output=True,
        text=True,
    )
    assert build.returncode == 0, build.stderr
    return subprocess.run([str(binary), str(vectors)], capture_output=True, text=True)


@pytest.mark.parametrize("kind", [ValueKind.FLOAT, ValueKind.DOUBLE, ValueKind.INT16])
def test_compiled_header_agrees_on_depth14_model(tmp_path, ea60_fm, kind):
    train, _ = split(ea60_fm, 0.7, seed=42)
    model = fit(train, TrainConfig(max_depth=14, seed=42))
    emitted = emit_header(model, EmitOptions(symbol="classify", values=kind))
    n = 10_000 if kind is ValueKind.FLOAT else 2_000
    vectors = emit_eval_vectors(model, n=n, seed=1010, value_kind=kind)
    work = tmp_path / kind.value
    work.mkdir()
    result = run_harness(work, emitted.source, vectors, "classify")
    assert result.returncode == 0, result.stdout + result.stderr
    assert "mismatches 0" in result.stdout
    tested = int(result.stdout.splitlines()[0].split()[1])
    assert tested >= n
