from __future__ import annotations

import numpy as np
import pytest
import torch

_ACCEPTANCE: list[tuple[str, str]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion this test gates")
    config.addinivalue_line("markers", "slow: trains models; minutes on one CPU core")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    label = report.user_properties and dict(report.user_properties).get("criterion")
    if label:
        _ACCEPTANCE.append((label, report.outcome))


def pytest_runtest_setup(item):
    mark = item.get_closest_marker("criterion")
    if mark:
        item.user_properties.append(("criterion", mark.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {label}")


def central_difference(loss_fn, param: torch.Tensor, index: tuple, eps: float) -> float:
    """Finite-difference derivative of ``loss_fn()`` w.r.t. one entry of ``param``."""
    with torch.no_grad():
        orig = param[index].item()
        param[index] = orig + eps
        up = float(loss_fn())
        param[index] = orig - eps
        down = float(loss_fn())
        param[index] = orig
    return (up - down) / (2 * eps)


def relative_error(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-12)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


TINY_MODEL = dict(
    image_size=16, block_size=8, codec_widths=(4, 8), cbr="1/4", scan_width=4,
    extract_channels=2, extract_width=4, prox_width=4, prox_depth=2, n_iter=2,
)


@pytest.fixture
def tiny_config():
    """A seconds-scale experiment: 16x16 images, 2 unrolled rounds, 2 epochs."""
    from adaptive_jsscc.config import ExperimentConfig

    return ExperimentConfig().replace(
        epochs=2, lr_schedule=[[0, 1e-3], [1, 1e-4]], batch_size=2, steps_per_epoch=2,
        val_images=2, snr_grid=[0.0, 10.0], ratio_grid=[0.1, 0.5], **TINY_MODEL,
    )


@pytest.fixture
def tiny_corpus(tmp_path):
    from adaptive_jsscc.imaging import write_desk_corpus

    root = tmp_path / "corpus"
    write_desk_corpus(root, size=16, n_natural=4, n_synthetic=2, block_size=8, seed=0)
    return root
