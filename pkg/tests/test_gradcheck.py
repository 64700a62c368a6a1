import numpy as np
import pytest

from advstyle_lab.core import Tensor, ops
from advstyle_lab.core.gradcheck import check_gradients, op_cases
from advstyle_lab.helper.gradcheck_utils import advstyle_suite, backbone_suite, run_scope, summarize
from advstyle_lab.handler.verify.gradcheck_handler import gradcheck_handler


@pytest.mark.parametrize("name", sorted(op_cases()))
def test_every_op_passes_on_seeded_instances(name):
    build = op_cases()[name]
    for seed in range(5):
        case = build(np.random.default_rng(seed))
        report = check_gradients(case.f, case.x, scale=case.scale, name=name)
        assert report.passed, f"{name}#{seed}: {report.max_rel_error:.3e}"


def test_wrong_gradient_is_caught():
    def broken(x):
        # Forward is x**2 but the tape only sees a linear function.
        return ops.sum(ops.mul(x, Tensor(x.data.copy())))

    report = check_gradients(broken, Tensor(np.array([1.0, 2.0, -3.0])))
    assert not report.passed
    assert report.max_rel_error > 0.1


def test_relu_kink_is_excluded():
    x = Tensor(np.array([0.0, 1.5, -2.0]))
    report = check_gradients(lambda t: ops.sum(ops.relu(t)), x, eps=1e-4)
    assert report.passed
    assert report.excluded == 1
    assert report.excluded_mask == [True, False, False]


def test_report_vectors_have_one_entry_per_coordinate():
    x = Tensor(np.ones((2, 3)))
    report = check_gradients(lambda t: ops.sum(ops.mul(t, t)), x)
    assert len(report.analytic) == len(report.numeric) == len(report.relative_error) == 6
    assert report.checked == 6
    assert not x.requires_grad


def test_non_positive_eps_rejected():
    with pytest.raises(ValueError):
        check_gradients(lambda t: ops.sum(t), Tensor(np.ones(2)), eps=0.0)


def test_advstyle_suite_passes():
    reports = advstyle_suite(instances=3)
    summary = summarize(reports)
    assert summary["failed"] == []
    # full: input and two scales; the two variants: two scales each.
    assert summary["checks"] == 3 * 7


@pytest.mark.slow
def test_backbone_suite_passes():
    reports = backbone_suite(instances=1)
    assert [r.name for r in reports if not r.passed] == []
    names = {r.name.split("#")[0] for r in reports}
    assert "backbone.input" in names
    assert "backbone.advstyle.block4.sigma_sigma" in names


def test_unknown_scope_raises():
    with pytest.raises(ValueError):
        run_scope("everything")


def test_handler_reports_failure_with_exit_code_two(monkeypatch):
    from advstyle_lab.handler.verify import gradcheck_handler as module
    from advstyle_lab.models import GradCheckReport

    failing = GradCheckReport(name="x", passed=False, max_rel_error=1.0, rtol=1e-4, eps=1e-6, checked=1, excluded=0)
    monkeypatch.setattr(module, "run_scope", lambda scope, eps, rtol: [failing])
    response = gradcheck_handler("ops")
    assert response["exit_code"] == 2
    assert response["data"]["failed"] == ["x"]


def test_handler_validates_scope():
    assert gradcheck_handler("nope")["exit_code"] == 1
    assert gradcheck_handler("ops", eps=-1.0)["exit_code"] == 1
