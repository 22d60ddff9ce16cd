import json
import os
import subprocess

import numpy as np
import pytest

import brpo_lab as brpo


def chain2():
    reward = np.array([[0.0, 0.0], [1.0, 1.0]])
    transition = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    return brpo.FiniteMdp(reward, transition, np.array([1.0, 0.0]), 0.5, 1.0)


def test_chain2_values():
    mdp = chain2()
    always1 = brpo.TabularPolicy(np.array([[0.0, 1.0], [0.0, 1.0]]))
    v = brpo.evaluate_policy(mdp, always1)
    np.testing.assert_allclose(v, [2.0 / 3.0, 4.0 / 3.0], atol=1e-12)
    assert brpo.expected_return(mdp, always1) == pytest.approx(2.0 / 3.0, abs=1e-12)
    adv = brpo.advantage(mdp, always1)
    assert adv[0, 0] == pytest.approx(-1.0 / 3.0, abs=1e-12)


def test_mix_and_identity():
    mdp = chain2()
    beta = brpo.TabularPolicy.uniform(2, 2)
    rho = brpo.TabularPolicy(np.array([[0.3, 0.7], [0.8, 0.2]]))
    lam = np.zeros((2, 2))
    np.testing.assert_array_equal(brpo.mix(beta, rho, lam), beta.probs)
    report = brpo.diff_value_identity(mdp, beta, rho, np.full((2, 2), 0.5))
    assert report["pass"]
    assert report["max_deviation"] <= 1e-8


def test_projection_feasible():
    x = brpo.project_confidence(np.array([0.9, 0.1, 0.5]), np.array([0.2, 0.5, 0.3]), np.array([0.4, 0.4, 0.2]))
    d = np.array([0.2, -0.1, -0.1])
    assert abs(x @ d) <= 1e-9
    assert x.min() >= 0.0 and x.max() <= 1.0


def test_verify_suites():
    for suite in ("identities", "proofs"):
        ok, csv = brpo.verify(suite, 10, 3)
        assert ok
        assert csv.startswith("instance_id,bound_name,rhs,exact_gap,slack,pass\n")


def test_generate_and_train():
    mdp, spec = brpo.make_env("chain:8")
    assert spec == "chain:8"
    beta = brpo.behavior_policy(mdp, 0.75, 0.25)
    text = brpo.generate_batch("chain:8", beta, 2000, 1, 0.25, 0.75)
    lines = text.splitlines()
    assert len(lines) == 2001
    assert json.loads(lines[1]).keys() >= {"s", "a", "r", "sp"}
    assert text == brpo.generate_batch("chain:8", beta, 2000, 1, 0.25, 0.75)

    adv = brpo.advantage(mdp, beta)
    probs, lam, trace = brpo.train_brpo(text, beta, adv, {"iterations": 3})
    assert trace.splitlines()[0] == "iter,half_step,L_bar,Lp,Lpp,Lppp,J_exact_if_available"
    pi = brpo.TabularPolicy(probs)
    assert brpo.expected_return(mdp, pi) >= brpo.expected_return(mdp, beta) - 1e-9
    assert lam.min() >= 0.0 and lam.max() <= 1.0


@pytest.mark.skipif("BRPO_CLI" not in os.environ, reason="CLI path not provided")
def test_cli_verify(tmp_path):
    out = tmp_path / "v.csv"
    proc = subprocess.run(
        [os.environ["BRPO_CLI"], "verify", "--suite", "identities", "--trials", "5", "--csv", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert out.read_text().count("\n") == 6
