import unittest
from fractions import Fraction

import numpy as np

from src.exceptions.exceptions import ProtocolAbortError, ScenarioInfeasibleError
from src.models.message_model import MessageKind
from src.models.params_model import FaultConfig, RoundInputs, SystemParams
from src.service.codec_service import reconstruct
from src.service.example_service import walkthrough_scenario
from src.service.simulation_service import FslSimulator, SimulationOptions, run_round, run_rounds

GAMMAS = {1: [1], 2: [2], 3: [3], 4: [1, 3]}
QUICK = SimulationOptions(check_leakage=False, check_privacy=False)


def small_params(**overrides):
    values = dict(N=4, C=4, K=4, L=2, D=3, J=1, E=1, delta="0", q=13)
    values.update(overrides)
    return SystemParams(**values)


class WalkthroughRoundTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        params, inputs, faults = walkthrough_scenario()
        cls.simulator = FslSimulator(params, seed=0)
        cls.before = cls.simulator.model.copy()
        cls.report = cls.simulator.run_round(inputs, faults)

    def test_union_and_repair(self):
        self.assertEqual(self.report.union, [1, 3, 4])
        self.assertTrue(self.report.committed)
        self.assertEqual(self.report.repaired, 4)
        self.assertEqual(sorted(self.simulator.dbs), [1, 2, 3, 4])

    def test_untouched_submodel_keeps_its_value(self):
        self.assertTrue(np.array_equal(self.simulator.model[1], self.before[1]))
        self.assertFalse(np.array_equal(self.simulator.model[0], self.before[0]))

    def test_verdicts(self):
        verdicts = self.report.verdicts
        self.assertTrue(verdicts.all_pass)
        self.assertTrue(verdicts.reliability)
        self.assertTrue(verdicts.union)
        self.assertTrue(verdicts.privacy)
        self.assertTrue(verdicts.eavesdropper)
        self.assertTrue(verdicts.cost_orders)
        self.assertLessEqual(Fraction(self.report.leakage), Fraction(1, 2))

    def test_costs(self):
        costs = self.report.costs
        self.assertEqual(costs.phases["psu"].total, (4 + 3 + 9) * 4)
        self.assertTrue(costs.psu_exact)
        self.assertEqual(costs.storage_total, 176)
        self.assertEqual(costs.ceilings["crr"], 128)
        self.assertEqual(costs.ceilings["storage"], 368)
        for phase in ("crg", "psu", "write", "crr", "repair"):
            self.assertLessEqual(costs.phases[phase].total, costs.ceilings[phase], phase)

    def test_events_mention_benched_clients_and_repair(self):
        self.assertTrue(any("repair: database 4 rebuilt" in e for e in self.report.events))

    def test_transcript_matches_report(self):
        self.assertEqual(len(self.simulator.last_transcript), self.report.transcript_length)
        self.assertEqual(len(self.report.transcript_hash), 64)


class DeterminismTest(unittest.TestCase):
    def test_same_seed_same_round(self):
        params, inputs, faults = walkthrough_scenario()
        first = run_round(params, inputs, faults, seed=3, options=QUICK)
        second = run_round(params, inputs, faults, seed=3, options=QUICK)
        self.assertEqual(first.model_dump(), second.model_dump())

    def test_seed_changes_transcript(self):
        params, inputs, faults = walkthrough_scenario()
        first = run_round(params, inputs, faults, seed=3, options=QUICK)
        other = run_round(params, inputs, faults, seed=4, options=QUICK)
        self.assertNotEqual(first.transcript_hash, other.transcript_hash)
        self.assertEqual(first.union, other.union)


class MultiRoundTest(unittest.TestCase):
    def test_increments_accumulate(self):
        params = small_params()
        ones = {i: [[1, 1]] * 4 for i in range(1, 5)}
        inputs = RoundInputs(gammas={1: [1], 2: [1, 2], 3: [], 4: [3]}, increments=ones)
        simulator = FslSimulator(params, seed=5, initial_model=[[0, 0]] * 4, options=QUICK)
        for r in range(2):
            report = simulator.run_round(inputs)
            self.assertEqual(report.round, r)
            self.assertEqual(report.union, [1, 2, 3])
            self.assertTrue(report.verdicts.reliability)
        self.assertEqual(simulator.model[:, :2].tolist(), [[4, 4], [2, 2], [2, 2], [0, 0]])

    def test_storage_tracks_plaintext_updates(self):
        params = small_params(K=3, delta="1/4")
        rng = np.random.default_rng(77)
        simulator = FslSimulator(params, seed=7, options=QUICK)
        plain = np.array(simulator.model.tolist())
        for r in range(50):
            gammas = {i: sorted({int(k) for k in rng.integers(1, 4, size=rng.integers(0, 3))}) for i in params.client_ids}
            increments = {i: rng.integers(0, 13, size=(3, 2)).tolist() for i in params.client_ids}
            report = simulator.run_round(RoundInputs(gammas=gammas, increments=increments))
            self.assertTrue(report.verdicts.reliability, (r, report.events))
            for i in params.client_ids:
                for k in gammas[i]:
                    plain[k - 1, :2] += increments[i][k - 1]
            plain %= 13

            readers = sorted(int(j) for j in rng.choice(sorted(simulator.dbs), size=params.D, replace=False))
            for k in range(1, params.K + 1):
                for inst, layout in enumerate(simulator.schedule.layouts):
                    rows = [simulator.dbs[j].rows(k)[inst] for j in readers]
                    decoded = reconstruct(rows, layout, simulator.psi).messages.tolist()
                    self.assertEqual(decoded, plain[k - 1][list(simulator.schedule.positions(inst))].tolist(), (r, k))
        self.assertEqual(simulator.round, 50)

    def test_changing_desired_sets(self):
        params = small_params()
        rounds = [
            (RoundInputs(gammas={1: [1], 2: [2]}), None),
            (RoundInputs(gammas={3: [4], 4: [4]}), None),
            (RoundInputs(gammas={1: [1, 2, 3, 4]}), FaultConfig(failed_db=2)),
        ]
        reports = run_rounds(params, rounds, seed=2)
        self.assertEqual([r.union for r in reports], [[1, 2], [4], [1, 2, 3, 4]])
        for report in reports:
            self.assertTrue(report.verdicts.all_pass, report.events)

    def test_round_limit(self):
        rounds = [(RoundInputs(), None)] * 51
        with self.assertRaises(ScenarioInfeasibleError):
            run_rounds(small_params(), rounds)


class FaultRemedyTest(unittest.TestCase):
    def run_with(self, faults, seed=1):
        simulator = FslSimulator(small_params(), seed=seed)
        report = simulator.run_round(RoundInputs(gammas=GAMMAS), faults)
        return simulator, report

    def test_baseline(self):
        _, report = self.run_with(FaultConfig())
        self.assertEqual(report.union, [1, 2, 3])
        self.assertTrue(report.verdicts.all_pass)
        self.assertEqual(report.costs.remedy_total, 0)
        self.assertEqual(report.leakage, "0")

    def test_dropped_client(self):
        _, report = self.run_with(FaultConfig(dropped_clients=[2]))
        self.assertEqual(report.union, [1, 3])
        self.assertTrue(report.verdicts.all_pass, report.events)
        self.assertGreater(report.costs.remedy_total, 0)
        self.assertIsNone(report.costs.psu_expected)

    def test_late_client_is_buffered(self):
        dropped_sim, dropped = self.run_with(FaultConfig(dropped_clients=[2]))
        late_sim, late = self.run_with(FaultConfig(late_clients=[2]))
        self.assertEqual(late.union, dropped.union)
        self.assertTrue(late.verdicts.all_pass, late.events)
        self.assertTrue(np.array_equal(late_sim.model, dropped_sim.model))
        kinds = {msg.kind for msg in late_sim.dbs[2].late_answers}
        self.assertEqual(kinds, {MessageKind.AU1, MessageKind.AW1})
        self.assertTrue(any("late answers" in e for e in late.events))

    def test_late_buffer_holds_one_round(self):
        simulator, _ = self.run_with(FaultConfig(late_clients=[2]))
        buffered = len(simulator.dbs[2].late_answers)
        self.assertGreater(buffered, 0)
        report = simulator.run_round(RoundInputs(gammas=GAMMAS))
        self.assertTrue(report.verdicts.all_pass, report.events)
        for db in simulator.dbs.values():
            self.assertEqual(db.late_answers, [])

        simulator.run_round(RoundInputs(gammas=GAMMAS), FaultConfig(late_clients=[2]))
        self.assertEqual(len(simulator.dbs[2].late_answers), buffered)

    def test_dropped_database(self):
        _, report = self.run_with(FaultConfig(dropped_dbs=[2]))
        self.assertEqual(report.union, [1, 3])
        self.assertTrue(report.verdicts.all_pass, report.events)
        self.assertTrue(any("database 2 silent" in e for e in report.events))

    def test_named_eavesdropper(self):
        _, report = self.run_with(FaultConfig(eavesdropper_set=[3]))
        self.assertEqual(report.eavesdropper_set, [3])
        self.assertEqual(report.leakage, "0")


class ReliabilitySweepTest(unittest.TestCase):
    """Seeded random rounds checked against a plaintext model update."""

    SEEDS = range(50)

    def sweep(self, faults, **overrides):
        values = dict(N=4, C=6, K=4, L=2, D=3, J=1, E=1, delta="1/4", q=13)
        values.update(overrides)
        params = SystemParams(**values)
        silent = set(faults.dropped_dbs) | ({faults.failed_db} if faults.failed_db else set())
        for seed in self.SEEDS:
            rng = np.random.default_rng(100 + seed)
            gammas = {i: sorted({int(k) for k in rng.integers(1, 5, size=rng.integers(0, 3))}) for i in params.client_ids}
            increments = {i: rng.integers(0, 13, size=(4, 2)).tolist() for i in params.client_ids}
            start = rng.integers(0, 13, size=(4, 2))
            simulator = FslSimulator(params, seed=seed, initial_model=start.tolist(), options=QUICK)
            report = simulator.run_round(RoundInputs(gammas=gammas, increments=increments), faults)

            expected = start.copy()
            for i in params.client_ids:
                if i in faults.absent_clients or params.group_assignment[i] in silent:
                    continue
                for k in gammas[i]:
                    expected[k - 1] += increments[i][k - 1]
            self.assertEqual(simulator.model[:, :2].tolist(), (expected % 13).tolist(), seed)
            self.assertTrue(report.verdicts.reliability, (seed, report.events))
            self.assertTrue(report.verdicts.union, seed)
            self.assertTrue(report.verdicts.storage_consistency, seed)

    def test_fault_free(self):
        self.sweep(FaultConfig())

    def test_two_dropped_clients(self):
        self.sweep(FaultConfig(dropped_clients=[2, 5]))

    def test_late_client(self):
        self.sweep(FaultConfig(late_clients=[3]))

    def test_dropped_database(self):
        self.sweep(FaultConfig(dropped_dbs=[1]))

    def test_failed_database(self):
        self.sweep(FaultConfig(failed_db=3))

    def test_adversarial_database(self):
        self.sweep(FaultConfig(adversary_set=[5], corruption="targeted-flip"), N=7, A=1)


class AdversaryTest(unittest.TestCase):
    def test_majority_decoding_recovers_round(self):
        params = SystemParams(N=7, C=4, K=3, L=2, D=3, J=1, E=1, A=1, delta="0", q=13)
        inputs = RoundInputs(gammas={1: [1], 2: [2], 3: [2, 3], 4: []})
        report = run_round(params, inputs, FaultConfig(adversary_set=[3]), seed=0, options=QUICK)
        self.assertEqual(report.union, [1, 2, 3])
        self.assertTrue(report.verdicts.reliability)
        self.assertTrue(report.verdicts.union)
        self.assertTrue(report.verdicts.storage_consistency)
        self.assertIsNone(report.verdicts.cost_orders)
        self.assertTrue(any("majority decoding" in e for e in report.events))

    def test_every_strategy_and_position_matches_fault_free(self):
        params = SystemParams(N=7, C=4, K=3, L=2, D=3, J=1, E=1, A=1, delta="0", q=13)
        strategies = ("random", "replay", "targeted-flip")
        combos = [(s, j) for s in strategies for j in params.db_ids]
        honest = {}
        for trial in range(200):
            seed = trial // len(combos)
            strategy, adversary = combos[trial % len(combos)]
            rng = np.random.default_rng(500 + seed)
            gammas = {i: sorted({int(k) for k in rng.integers(1, 4, size=rng.integers(0, 3))}) for i in params.client_ids}
            inputs = RoundInputs(gammas=gammas)
            if seed not in honest:
                simulator = FslSimulator(params, seed=seed, options=QUICK)
                honest[seed] = (simulator.run_round(inputs), simulator.model.tolist())
            expected, model = honest[seed]

            simulator = FslSimulator(params, seed=seed, options=QUICK)
            report = simulator.run_round(inputs, FaultConfig(adversary_set=[adversary], corruption=strategy))
            context = (trial, strategy, adversary)
            self.assertEqual(report.union, expected.union, context)
            self.assertTrue(report.verdicts.reliability, context)
            self.assertTrue(report.verdicts.storage_consistency, context)
            self.assertEqual(report.verdicts.storage_consistency, expected.verdicts.storage_consistency, context)
            self.assertEqual(simulator.model.tolist(), model, context)


class EdgeRoundTest(unittest.TestCase):
    def test_no_clients(self):
        simulator = FslSimulator(small_params(C=0), options=QUICK)
        before = simulator.model.copy()
        report = simulator.run_round(RoundInputs())
        self.assertEqual(report.union, [])
        self.assertFalse(report.committed)
        self.assertEqual(report.transcript_length, 0)
        self.assertTrue(np.array_equal(simulator.model, before))
        self.assertIn("no active clients: storage unchanged", report.events)

    def test_empty_union_skips_write(self):
        simulator = FslSimulator(small_params(), seed=2)
        before = simulator.model.copy()
        report = simulator.run_round(RoundInputs(gammas={}))
        self.assertEqual(report.union, [])
        self.assertFalse(report.committed)
        self.assertEqual(report.costs.phases["write"].total, 0)
        self.assertTrue(np.array_equal(simulator.model, before))
        self.assertTrue(report.verdicts.all_pass)

    def test_single_active_client_aborts(self):
        simulator = FslSimulator(small_params(), options=QUICK)
        with self.assertRaises(ProtocolAbortError):
            simulator.run_round(RoundInputs(gammas=GAMMAS), FaultConfig(dropped_clients=[2, 3, 4]))
        self.assertEqual(simulator.round, 0)


class InfeasibleScenarioTest(unittest.TestCase):
    def test_eavesdropper_beyond_collusion_bound(self):
        with self.assertRaises(ScenarioInfeasibleError):
            FslSimulator(small_params(E=2))

    def test_composite_field(self):
        with self.assertRaises(ScenarioInfeasibleError):
            FslSimulator(small_params(q=12))

    def test_field_smaller_than_population(self):
        with self.assertRaises(ScenarioInfeasibleError):
            FslSimulator(small_params(q=3))

    def test_too_few_databases_for_adversaries(self):
        with self.assertRaises(ScenarioInfeasibleError):
            FslSimulator(small_params(N=5, A=1))

    def test_desired_submodel_out_of_range(self):
        simulator = FslSimulator(small_params(), options=QUICK)
        with self.assertRaises(ScenarioInfeasibleError):
            simulator.run_round(RoundInputs(gammas={1: [9]}))

    def test_eavesdropper_set_of_wrong_size(self):
        simulator = FslSimulator(small_params(), options=QUICK)
        with self.assertRaises(ScenarioInfeasibleError):
            simulator.run_round(RoundInputs(gammas=GAMMAS), FaultConfig(eavesdropper_set=[1, 2]))


if __name__ == "__main__":
    unittest.main()
