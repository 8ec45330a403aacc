import math
import sys
import textwrap

import pytest

from carsopt.evaluators import (
    BuiltinEvaluator,
    EvaluationRequest,
    EvaluatorTransportError,
    ExternalEvaluator,
    builtin_problem,
    make_evaluator,
    surrogate_boost,
)
from carsopt.fitness import is_valid


FEASIBLE_BOOST = {"C1": [1e-5], "L1": [10**-4.5], "fsw": [1e5]}


class TestSurrogateBoost:
    def test_feasible_design(self):
        meas = surrogate_boost(FEASIBLE_BOOST)
        assert meas["vmean"][0] == pytest.approx(12.0, abs=1e-12)
        assert meas["vrip"][0] == pytest.approx(2e-3, rel=1e-12)
        spec, _ = builtin_problem("boost")
        assert is_valid(spec, meas)

    def test_deterministic(self):
        a = surrogate_boost(FEASIBLE_BOOST)
        b = surrogate_boost(FEASIBLE_BOOST)
        assert a == b

    def test_ripple_decreases_with_capacitance(self):
        base = dict(FEASIBLE_BOOST)
        rips = []
        for c1 in (1e-7, 1e-6, 1e-5, 1e-4):
            base["C1"] = [c1]
            rips.append(surrogate_boost(base)["vrip"][0])
        assert rips == sorted(rips, reverse=True)

    def test_efficiency_decreases_with_frequency(self):
        base = dict(FEASIBLE_BOOST)
        effs = []
        for fsw in (1e3, 1e4, 1e5, 1e6):
            base["fsw"] = [fsw]
            effs.append(surrogate_boost(base)["eff_tot"][0])
        assert effs == sorted(effs, reverse=True)

    def test_vmean_range(self):
        low = surrogate_boost({"C1": [1e-5], "L1": [1e-6], "fsw": [100.0]})
        high = surrogate_boost({"C1": [1e-5], "L1": [0.1], "fsw": [1e6]})
        assert 5.0 < low["vmean"][0] < 12.0 < high["vmean"][0] < 19.0


class TestAnalyticProblems:
    def test_sphere_center_infeasible(self):
        spec, ev = builtin_problem("sphere_ring", 3)
        meas = ev._fn({f"x{i}": [0.0] for i in range(3)})
        assert meas["sphere"][0] == 0.0
        assert not is_valid(spec, meas)

    def test_sphere_constrained_optimum(self):
        spec, ev = builtin_problem("sphere_ring", 4)
        meas = ev._fn({f"x{i}": [0.15] for i in range(4)})
        assert meas["radius"][0] == pytest.approx(0.3)
        assert meas["sphere"][0] == pytest.approx(0.09)
        assert is_valid(spec, meas)

    def test_rosenbrock_optimum(self):
        spec, ev = builtin_problem("rosenbrock_box", 4)
        meas = ev._fn({f"x{i}": [1.5] for i in range(4)})
        assert meas["rosen"][0] == pytest.approx(0.0, abs=1e-12)
        assert is_valid(spec, meas)

    def test_rastrigin_optimum(self):
        spec, ev = builtin_problem("rastrigin_multi", 4)
        meas = ev._fn({f"x{i}": [0.5] for i in range(4)})
        assert meas["rastrigin"][0] == pytest.approx(0.0, abs=1e-9)
        assert is_valid(spec, meas)

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="unknown built-in"):
            builtin_problem("nope")


class TestBuiltinEvaluator:
    def test_per_sample_failure_isolated(self):
        def fn(params):
            if params["x"][0] < 0:
                raise ValueError("negative input")
            return {"y": [params["x"][0] ** 2]}

        ev = BuiltinEvaluator(fn)
        res = ev.evaluate_batch(
            [EvaluationRequest(0, {"x": [2.0]}), EvaluationRequest(1, {"x": [-1.0]})]
        )
        assert res[0].ok and res[0].meas["y"] == [4.0]
        assert not res[1].ok and "negative" in res[1].error


def child_script(tmp_path, body):
    path = tmp_path / "child.py"
    path.write_text(textwrap.dedent(body))
    return f"{sys.executable} {path}"


ECHO_CHILD = """\
    import sys, json
    for line in sys.stdin:
        req = json.loads(line)
        total = sum(v[0] for v in req["params"].values())
        print(json.dumps({"id": req["id"], "meas": {"y": [total]}}), flush=True)
"""


class TestExternalEvaluator:
    def requests(self, n):
        return [EvaluationRequest(i, {"a": [float(i)], "b": [0.5]}) for i in range(n)]

    def test_round_trip(self, tmp_path):
        ev = ExternalEvaluator(child_script(tmp_path, ECHO_CHILD), timeout=10.0)
        try:
            res = ev.evaluate_batch(self.requests(5))
        finally:
            ev.close()
        assert [r.sample_id for r in res] == [0, 1, 2, 3, 4]
        assert all(r.ok for r in res)
        assert [r.meas["y"][0] for r in res] == [0.5, 1.5, 2.5, 3.5, 4.5]

    def test_empty_batch(self, tmp_path):
        ev = ExternalEvaluator(child_script(tmp_path, ECHO_CHILD))
        try:
            assert ev.evaluate_batch([]) == []
        finally:
            ev.close()

    def test_duplicate_params_identical(self, tmp_path):
        ev = ExternalEvaluator(child_script(tmp_path, ECHO_CHILD), timeout=10.0)
        try:
            reqs = [EvaluationRequest(i, {"a": [3.0], "b": [0.5]}) for i in range(4)]
            res = ev.evaluate_batch(reqs)
        finally:
            ev.close()
        assert all(r.meas == res[0].meas for r in res)

    def test_out_of_order_responses(self, tmp_path):
        body = """\
            import sys, json
            buf = []
            for line in sys.stdin:
                buf.append(json.loads(line))
                if len(buf) == 4:
                    for req in reversed(buf):
                        print(json.dumps({"id": req["id"], "meas": {"y": [float(req["id"])]}}), flush=True)
                    buf = []
        """
        ev = ExternalEvaluator(child_script(tmp_path, body), timeout=10.0)
        try:
            res = ev.evaluate_batch(self.requests(4))
        finally:
            ev.close()
        assert [r.sample_id for r in res] == [0, 1, 2, 3]
        assert [r.meas["y"][0] for r in res] == [0.0, 1.0, 2.0, 3.0]

    def test_error_response(self, tmp_path):
        body = """\
            import sys, json
            for line in sys.stdin:
                req = json.loads(line)
                if req["id"] == 1:
                    print(json.dumps({"id": 1, "error": "diverged"}), flush=True)
                else:
                    print(json.dumps({"id": req["id"], "meas": {"y": [1.0]}}), flush=True)
        """
        ev = ExternalEvaluator(child_script(tmp_path, body), timeout=10.0)
        try:
            res = ev.evaluate_batch(self.requests(3))
        finally:
            ev.close()
        assert res[0].ok and res[2].ok
        assert not res[1].ok and res[1].error == "diverged"

    def test_noise_lines_ignored(self, tmp_path):
        body = """\
            import sys, json
            for line in sys.stdin:
                req = json.loads(line)
                print("WARNING: solver chatter", flush=True)
                print("{not json", flush=True)
                print(json.dumps({"id": req["id"], "meas": {"y": [7.0]}}), flush=True)
        """
        ev = ExternalEvaluator(child_script(tmp_path, body), timeout=10.0)
        try:
            res = ev.evaluate_batch(self.requests(3))
        finally:
            ev.close()
        assert all(r.ok and r.meas["y"] == [7.0] for r in res)

    def test_silent_sample_times_out(self, tmp_path):
        body = """\
            import sys, json
            for line in sys.stdin:
                req = json.loads(line)
                if req["id"] == 1:
                    continue
                print(json.dumps({"id": req["id"], "meas": {"y": [1.0]}}), flush=True)
        """
        ev = ExternalEvaluator(child_script(tmp_path, body), timeout=1.0)
        try:
            res = ev.evaluate_batch(self.requests(3))
        finally:
            ev.close()
        assert res[0].ok and res[2].ok
        assert not res[1].ok and res[1].error == "timeout"

    def test_child_death_raises_transport_error(self, tmp_path):
        body = """\
            import sys, json
            line = sys.stdin.readline()
            req = json.loads(line)
            print(json.dumps({"id": req["id"], "meas": {"y": [1.0]}}), flush=True)
            sys.exit(1)
        """
        ev = ExternalEvaluator(child_script(tmp_path, body), timeout=10.0, max_inflight=1)
        with pytest.raises(EvaluatorTransportError) as exc_info:
            ev.evaluate_batch(self.requests(4))
        done = exc_info.value.results
        assert [r.sample_id for r in done] == [0]
        assert done[0].ok

    def test_missing_command(self):
        with pytest.raises(EvaluatorTransportError):
            ExternalEvaluator("/no/such/binary-xyz")


class TestMakeEvaluator:
    def test_builtin_reference(self):
        ev = make_evaluator("builtin:boost")
        res = ev.evaluate_batch([EvaluationRequest(0, FEASIBLE_BOOST)])
        assert res[0].meas["vmean"][0] == pytest.approx(12.0)

    def test_cmd_reference(self, tmp_path):
        ev = make_evaluator("cmd:" + child_script(tmp_path, ECHO_CHILD), timeout=10.0)
        try:
            res = ev.evaluate_batch([EvaluationRequest(0, {"a": [1.0]})])
        finally:
            ev.close()
        assert res[0].meas["y"] == [1.0]

    def test_bad_reference(self):
        with pytest.raises(ValueError):
            make_evaluator("ftp:whatever")
