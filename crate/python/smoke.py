"""Smoke test for the dzo Python extension.

Exercises every exported surface once with known-answer checks: spectral
advisors against closed-form ring values, exact problem values and
gradients, schedule gain identities, the validator verdict in both
directions, a short run with its oracle-call accounting and worker-count
determinism, estimator reproducibility, rate fitting, and the error
mapping. Run as `python3 python/smoke.py`; exits nonzero on any failure.
"""

import math
import sys

import dzo


def close(a, b, rtol=1e-9, atol=0.0):
    return abs(a - b) <= atol + rtol * max(abs(a), abs(b))


def check_graph():
    g = dzo.Graph("ring", 4)
    assert g.n == 4 and g.connected
    assert close(g.rho, 4.0) and close(g.rho2, 2.0)
    eigs = g.eigenvalues()
    assert len(eigs) == 4 and close(eigs[0], 0.0, atol=1e-12)
    lap = g.laplacian()
    assert all(close(sum(row), 0.0, atol=1e-12) for row in lap)
    assert close(g.c1(), 1.5)
    assert close(g.c2(2.0), 1.0 / 149.0)
    assert close(g.d1(), 1.0 / 16.0)
    assert close(g.d2(0.03, 1.0, 2), 3.0 / 7552.0)
    assert close(dzo.Graph("complete", 2).c1(), 1.5)
    er = dzo.Graph("erdos_renyi", 10, er_prob=0.4, er_seed=7)
    assert er.connected and er.rho2 > 0.0


def check_problem():
    prob = dzo.Problem.quadratic_pl(4, 3, 2.0)
    assert prob.n == 4 and prob.p == 3
    assert close(prob.lf, 2.0) and close(prob.pl_nu, 1.0)
    assert prob.f_star == 0.0
    x = [1.0, -2.0, 0.5]
    # Eigenvalues evenly spaced over [1, 2]: 1, 1.5, 2.
    assert close(prob.value(x), 0.5 * (1.0 + 1.5 * 4.0 + 2.0 * 0.25))
    assert all(
        close(a, b) for a, b in zip(prob.grad(x), [1.0, -3.0, 1.0])
    )
    assert close(prob.local_value(2, x), prob.value(x))
    noisy = prob.with_noise(0.1, 0.5)
    assert close(noisy.sigma0, 0.1) and close(noisy.sigma1, 0.5)
    assert close(noisy.value(x), prob.value(x))
    flat = dzo.Problem.linear_probe(2, 3, 0.0)
    est = dzo.estimate_gradient(flat, 0, [0.3, -0.1, 2.0], 1e-3, seed=11)
    assert est == [0.0, 0.0, 0.0]


def check_schedule():
    sched = dzo.Schedule("pd_pl", kappa0=3e-4, kappa1=2.0, kappa2=3e-3, t1=40.0)
    assert sched.regime == "pd_pl" and close(sched.t1, 40.0)
    params = sched.params_at(5, 5, 4)
    assert close(params["eta"] * params["beta"], sched.kappa2)
    assert close(params["alpha"], sched.kappa1 * params["beta"])
    assert math.isnan(params["gamma"])
    primal = dzo.Schedule("primal_constant", kappa_eta=0.01, gamma=0.05)
    pp = primal.params_at(0, 4, 3)
    assert close(pp["eta"], 0.01) and close(pp["gamma"], 0.05)
    assert math.isnan(pp["beta"])


def check_validate():
    g = dzo.Graph("ring", 4)
    prob = dzo.Problem.quadratic_pl(4, 3, 2.0).with_noise(0.0, 0.5)
    good = dzo.Schedule("pd_diminishing", kappa1=2.0, kappa2=0.005)
    rep = dzo.validate(good, g, prob)
    assert rep["ok"] and rep["hard_failures"] == []
    assert close(rep["c1"], 1.5)
    bad = dzo.Schedule("pd_diminishing", kappa1=1.2, kappa2=0.005)
    rep = dzo.validate(bad, g, prob)
    assert not rep["ok"]
    assert any("kappa1" in msg for msg in rep["hard_failures"])


def check_run():
    g = dzo.Graph("ring", 4)
    prob = dzo.Problem.quadratic_pl(4, 3, 2.0).with_noise(0.0, 0.5)
    sched = dzo.Schedule("pd_diminishing", kappa1=2.0, kappa2=0.005)
    rows = dzo.run(prob, g, sched, 60, seed=7, record_every=10)
    assert [r["k"] for r in rows] == [0, 10, 20, 30, 40, 50, 60]
    assert all(r["oracle_calls"] == 2 * 4 * r["k"] for r in rows)
    assert all(math.isfinite(r["f_gap"]) for r in rows)
    again = dzo.run(prob, g, sched, 60, seed=7, record_every=10, workers=3)
    assert all(
        a[key] == b[key]
        for a, b in zip(rows, again)
        for key in ("f_gap", "grad_norm_sq", "consensus_err")
    )
    zeroed = dzo.run(prob, g, sched, 10, seed=7, x0="zeros")
    assert close(zeroed[0]["f_gap"], 0.0, atol=1e-15)


def check_estimator():
    prob = dzo.Problem.quadratic_pl(1, 5, 4.0)
    x = [0.7, -1.3, 0.4, 2.0, -0.6]
    first = dzo.estimate_gradient(prob, 0, x, 1e-4, seed=3, step=9)
    second = dzo.estimate_gradient(prob, 0, x, 1e-4, seed=3, step=9)
    assert first == second
    other = dzo.estimate_gradient(prob, 0, x, 1e-4, seed=3, step=10)
    assert first != other
    # A two-point estimate lies on the sampled direction, so its norm is
    # bounded by p times the gradient norm plus the smoothing remainder.
    grad = prob.grad(x)
    gnorm = math.sqrt(sum(v * v for v in grad))
    enorm = math.sqrt(sum(v * v for v in first))
    assert enorm <= 5.0 * (gnorm + 1.0)


def check_fits():
    ks = list(range(10, 201))
    decays = [3.0 * k ** -1.0 for k in ks]
    fit = dzo.fit_loglog(ks, decays, (10, 200))
    assert close(fit["slope"], -1.0, atol=1e-9) and fit["r2"] > 0.999999
    geoms = [2.0 * math.exp(-0.05 * k) for k in ks]
    fit = dzo.fit_semilog(ks, geoms, (10, 200))
    assert close(fit["slope"], -0.05, atol=1e-9)
    ravg = dzo.fit_loglog(ks, decays, (50, 200), mode="running_average")
    assert -1.0 < ravg["slope"] < -0.5


def check_errors():
    try:
        dzo.Graph("moebius", 4)
        raise AssertionError("unknown topology accepted")
    except ValueError:
        pass
    try:
        dzo.Problem.quadratic_pl(4, 3, 0.5)
        raise AssertionError("condition number below 1 accepted")
    except ValueError:
        pass
    g = dzo.Graph("ring", 4)
    prob = dzo.Problem.quadratic_pl(4, 3, 2.0)
    try:
        prob.value([1.0, 2.0])
        raise AssertionError("dimension mismatch accepted")
    except ValueError:
        pass
    wild = dzo.Schedule("pd_diminishing", kappa1=2.0, kappa2=50.0)
    try:
        dzo.run(prob, g, wild, 2000, x0="gaussian", x0_scale=1.0)
        raise AssertionError("divergent run returned normally")
    except RuntimeError:
        pass


def main():
    checks = [
        check_graph,
        check_problem,
        check_schedule,
        check_validate,
        check_run,
        check_estimator,
        check_fits,
        check_errors,
    ]
    for check in checks:
        check()
        print(f"{check.__name__}: ok")
    print(f"smoke: all {len(checks)} checks passed")


if __name__ == "__main__":
    sys.exit(main())
