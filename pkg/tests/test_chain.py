import math

import numpy as np
import pytest
import scipy.stats

from pluralitysim import (
    Dynamics,
    EnumerationLimitError,
    absorption_ensemble,
    absorption_probabilities,
    build_chain,
    drift_8_27,
    expected_absorption_time,
    expected_next_3maj,
    export_chain_text,
    median_rule,
    new_configuration,
    one_step_expectation,
    skewed_tiebreak_rule,
    table_rule_from_entries,
    three_majority,
    verify_supermartingale,
)

D3 = Dynamics.from_rule(three_majority())


def two_color_rule(keep_r, keep_b):
    """2-color table rule respecting the majority on keep_r / keep_b of the
    three r-majority / b-majority orderings."""
    entries = {}
    for i, t in enumerate([(0, 0, 1), (0, 1, 0), (1, 0, 0)]):
        entries[t] = 0 if i < keep_r else 1
    for i, t in enumerate([(1, 1, 0), (1, 0, 1), (0, 1, 1)]):
        entries[t] = 1 if i < keep_b else 0
    return table_rule_from_entries(2, entries)


class TestBuildChain:
    def test_n2_k2_row(self):
        chain = build_chain(2, 2, D3)
        assert chain.num_states == 3
        row = chain.matrix.getrow(chain.state_index((1, 1))).toarray().ravel()
        np.testing.assert_allclose(row, [0.25, 0.5, 0.25], atol=1e-14)

    def test_binomial_row_n3(self):
        chain = build_chain(3, 2, D3)
        row = chain.matrix.getrow(chain.state_index((2, 1))).toarray().ravel()
        expected = [scipy.stats.binom.pmf(j, 3, 20 / 27) for j in (0, 1, 2, 3)]
        # states are (0,3), (1,2), (2,1), (3,0): count of color 0 ascending
        np.testing.assert_allclose(row, expected, atol=1e-12)

    def test_monochromatic_self_loop(self):
        chain = build_chain(4, 3, D3)
        for idx in chain.absorbing:
            row = chain.matrix.getrow(int(idx)).toarray().ravel()
            assert row[int(idx)] == 1.0
            assert row.sum() == 1.0

    def test_row_sums_and_state_count(self):
        for d in (D3, Dynamics.from_rule(median_rule()), Dynamics.h_majority(2)):
            chain = build_chain(5, 3, d)
            assert chain.num_states == math.comb(7, 2)
            sums = np.asarray(chain.matrix.sum(axis=1)).ravel()
            np.testing.assert_allclose(sums, 1.0, atol=1e-10)

    def test_cap(self):
        with pytest.raises(EnumerationLimitError):
            build_chain(100, 4, D3, state_cap=1000)

    def test_h3_chain_equals_3maj_chain(self):
        a = build_chain(4, 3, D3)
        b = build_chain(4, 3, Dynamics.h_majority(3))
        diff = (a.matrix - b.matrix).toarray()
        assert np.abs(diff).max() <= 1e-12

    def test_color_permutation_symmetry(self):
        chain = build_chain(4, 3, D3)
        m = chain.matrix.toarray()
        # swap colors 0 and 2 in every state label
        perm = {
            i: chain.state_index((c[2], c[1], c[0]))
            for i, c in enumerate(map(tuple, chain.states))
        }
        for i in range(chain.num_states):
            for j in range(chain.num_states):
                assert m[i, j] == pytest.approx(m[perm[i], perm[j]], abs=1e-12)


class TestAbsorption:
    def test_symmetric_n2(self):
        chain = build_chain(2, 2, D3)
        b = absorption_probabilities(chain)
        i = chain.state_index((1, 1))
        np.testing.assert_allclose(b[i], [0.5, 0.5], atol=1e-12)
        t = expected_absorption_time(chain)
        assert t[i] == pytest.approx(2.0, abs=1e-12)

    def test_absorbing_rows(self):
        chain = build_chain(3, 3, D3)
        b = absorption_probabilities(chain)
        t = expected_absorption_time(chain)
        for pos, idx in enumerate(chain.absorbing):
            onehot = np.zeros(chain.absorbing.size)
            onehot[pos] = 1.0
            np.testing.assert_array_equal(b[int(idx)], onehot)
            assert t[int(idx)] == 0.0

    def test_majority_favored(self):
        chain = build_chain(4, 2, D3)
        b = absorption_probabilities(chain)
        i = chain.state_index((3, 1))
        all_zero = int(np.flatnonzero(chain.states[chain.absorbing].T[0] == 4)[0])
        assert b[i, all_zero] > 0.5

    def test_rows_sum_to_one(self):
        chain = build_chain(5, 3, Dynamics.from_rule(median_rule()))
        b = absorption_probabilities(chain)
        np.testing.assert_allclose(b.sum(axis=1), 1.0, atol=1e-8)

    def test_monte_carlo_cross_check(self):
        # independent one-step sampling vs the linear-algebra solve
        chain = build_chain(4, 2, D3)
        b = absorption_probabilities(chain)
        t = expected_absorption_time(chain)
        i = chain.state_index((3, 1))
        trials = 100_000
        winners, rounds = absorption_ensemble(
            new_configuration([3, 1]), D3, trials, np.random.default_rng(17)
        )
        assert (winners >= 0).all()
        p_hat = float((winners == 0).mean())
        col = int(np.flatnonzero(chain.states[chain.absorbing].T[0] == 4)[0])
        p_exact = b[i, col]
        sigma = math.sqrt(p_exact * (1 - p_exact) / trials)
        assert abs(p_hat - p_exact) <= 4 * sigma
        se_t = rounds.std(ddof=1) / math.sqrt(trials)
        assert abs(rounds.mean() - t[i]) <= 4 * se_t


class TestOneStepExpectation:
    def test_matches_closed_form(self):
        for n, k in [(2, 2), (3, 2), (4, 3), (6, 3)]:
            chain = build_chain(n, k, D3)
            for i, state in enumerate(map(tuple, chain.states)):
                mu = one_step_expectation(chain, i)
                np.testing.assert_allclose(
                    mu, expected_next_3maj(new_configuration(state)), atol=1e-9
                )

    def test_by_state_tuple(self):
        chain = build_chain(3, 2, D3)
        np.testing.assert_allclose(
            one_step_expectation(chain, (2, 1)), [20 / 9, 7 / 9], atol=1e-12
        )

    def test_symmetric_state(self):
        chain = build_chain(4, 2, D3)
        np.testing.assert_allclose(one_step_expectation(chain, (2, 2)), [2.0, 2.0], atol=1e-12)

    def test_unknown_state(self):
        chain = build_chain(3, 2, D3)
        with pytest.raises(KeyError):
            chain.state_index((4, 0))


class TestSupermartingale:
    def test_martingale_at_delta_2(self):
        rep = verify_supermartingale(two_color_rule(2, 2), 60)
        assert (rep.delta_r, rep.delta_b) == (2, 2)
        assert rep.exact_martingale
        assert np.abs(rep.drift).max() <= 1e-12

    def test_supermartingale_when_r_weaker(self):
        for dr, db in [(0, 1), (0, 3), (1, 2), (1, 3), (2, 3)]:
            rep = verify_supermartingale(two_color_rule(dr, db), 41)
            assert (rep.delta_r, rep.delta_b) == (dr, db)
            assert rep.supermartingale_above_half, (dr, db, rep.max_drift_above_half)

    def test_majority_strict_drift(self):
        rep = verify_supermartingale(three_majority(), 30)
        assert (rep.delta_r, rep.delta_b) == (3, 3)
        interior = rep.drift[16:30]
        assert (interior > 0).all()
        assert rep.drift[0] == pytest.approx(0.0, abs=1e-12)
        assert rep.drift[30] == pytest.approx(0.0, abs=1e-12)

    def test_absorbing_endpoints(self):
        rep = verify_supermartingale(two_color_rule(1, 1), 12)
        assert rep.drift[0] == pytest.approx(0.0, abs=1e-13)
        assert rep.drift[12] == pytest.approx(0.0, abs=1e-13)


class TestDrift827:
    def test_exact_at_zero_bias(self):
        p_r, p_g = drift_8_27(9, 0)
        assert p_r == pytest.approx(8 / 27, abs=1e-12)
        assert p_g == pytest.approx(10 / 27, abs=1e-12)
        p_r, p_g = drift_8_27(900, 0)
        assert p_r == pytest.approx(8 / 27, abs=1e-12)

    def test_bias_perturbation_bounded(self):
        n, s = 900, 9
        p_r, _ = drift_8_27(n, s)
        assert abs(p_r - 8 / 27) <= 5 * (s / n)

    def test_normalization(self):
        from pluralitysim import gen_three_color_lb, pick_probabilities_rule

        cfg = gen_three_color_lb(9, 3)
        p = pick_probabilities_rule(skewed_tiebreak_rule(), cfg)
        assert abs(p.sum() - 1.0) <= 1e-12


def test_export_text_format():
    chain = build_chain(2, 2, D3)
    text = export_chain_text(chain)
    lines = text.strip().split("\n")
    assert len(lines) == chain.num_states
    assert lines[0].startswith("0 2 ->")
    middle = lines[chain.state_index((1, 1))]
    left, _, right = middle.partition("->")
    assert left.strip() == "1 1"
    pairs = dict(tok.split(":") for tok in right.split())
    assert float(pairs[str(chain.state_index((2, 0)))]) == pytest.approx(0.25)


def test_singular_absorption_system_rejected():
    # hand-built chain whose transient states never reach absorption
    import scipy.sparse

    from pluralitysim.chain import ExactChain

    states = np.array([[2, 0], [1, 1], [0, 2]], dtype=np.int64)
    # state (1,1) loops to itself forever; monochromatic rows self-loop
    matrix = scipy.sparse.csr_matrix(
        np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    )
    chain = ExactChain(
        n=2, k=2, dynamics=D3, states=states, matrix=matrix,
        absorbing=np.array([0, 2]),
    )
    with pytest.raises(ValueError):
        absorption_probabilities(chain)
    with pytest.raises(ValueError):
        expected_absorption_time(chain)
