import unittest
from fractions import Fraction

from src.config.settings import Settings
from src.models.params_model import FaultConfig, RoundInputs, SystemParams
from src.service.example_service import walkthrough_scenario
from src.service.leakage_service import (
    measure_eavesdropper_leakage,
    measure_inter_client_privacy,
    measure_privacy,
    subsets,
)
from src.service.simulation_service import FslSimulator, SimulationOptions


class WalkthroughLeakageTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        params, inputs, faults = walkthrough_scenario()
        cls.simulator = FslSimulator(params, seed=0)
        cls.report = cls.simulator.run_round(inputs, faults)
        cls.record = cls.simulator.last_record

    def test_every_database_pair_within_bound(self):
        for pair in subsets(range(1, 5), 2, 64):
            self.assertLessEqual(measure_eavesdropper_leakage(self.record, pair), Fraction(1, 2), pair)

    def test_report_names_worst_pair(self):
        worst = measure_eavesdropper_leakage(self.record, self.report.eavesdropper_set)
        self.assertEqual(str(worst), self.report.leakage)
        self.assertEqual(len(self.report.eavesdropper_set), 2)

    def test_nothing_observed(self):
        self.assertEqual(measure_eavesdropper_leakage(self.record, []), 0)

    def test_colluding_databases_learn_only_the_sum(self):
        for colluding in subsets(range(1, 5), 2, 64):
            self.assertEqual(measure_privacy(self.record, colluding), 0, colluding)

    def test_routers_learn_nothing_about_other_clients(self):
        for router in self.record.routers.values():
            self.assertEqual(measure_inter_client_privacy(self.record, router), 0)


class LeakageLevelTest(unittest.TestCase):
    def run_with(self, delta):
        params = SystemParams(N=4, C=4, K=2, L=2, D=3, J=2, E=2, delta=delta, q=13)
        simulator = FslSimulator(params, seed=1)
        return simulator.run_round(RoundInputs(gammas={1: [1], 2: [2], 3: [1, 2]}))

    def test_secure_storage_leaks_nothing(self):
        report = self.run_with("0")
        self.assertEqual(report.leakage, "0")
        self.assertTrue(report.verdicts.eavesdropper)

    def test_tolerated_leakage_is_used(self):
        report = self.run_with("1")
        self.assertGreater(Fraction(report.leakage), 0)
        self.assertLessEqual(Fraction(report.leakage), 1)
        self.assertTrue(report.verdicts.eavesdropper)

    def test_named_set_replaces_enumeration(self):
        params = SystemParams(N=4, C=4, K=2, L=2, D=3, J=2, E=2, delta="1/2", q=13)
        report = FslSimulator(params, seed=1).run_round(
            RoundInputs(gammas={1: [1]}), FaultConfig(eavesdropper_set=[2, 4])
        )
        self.assertEqual(report.eavesdropper_set, [2, 4])


class SubsetsTest(unittest.TestCase):
    def test_limit(self):
        self.assertEqual(subsets([3, 1, 2, 4], 2, 3), [(1, 2), (1, 3), (1, 4)])
        self.assertEqual(len(subsets(range(1, 6), 2, 64)), 10)

    def test_default_limit_keeps_runs_short(self):
        self.assertEqual(Settings.model_fields["EXHAUSTIVE_SUBSET_LIMIT"].default, 8)
        limit = SimulationOptions().subset_limit
        self.assertEqual(len(subsets(range(1, 7), 3, limit)), min(limit, 20))


if __name__ == "__main__":
    unittest.main()
