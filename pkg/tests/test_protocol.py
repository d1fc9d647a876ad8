import unittest
from fractions import Fraction

import numpy as np

from src.exceptions.exceptions import (
    DecodingFailureError,
    InconsistentAnswerError,
    MissingRouterAnswerError,
    MissingShareError,
    NoMajorityError,
    UnknownDroppedClientError,
    WrongContributorCountError,
    ZeroContributionError,
)
from src.models.message_model import MessageKind, Phase
from src.models.state_model import ClientState, DatabaseState
from src.service.codec_service import plan_time_sharing, schedule_instances
from src.service.protocol_service import (
    adversary_decode_repetition,
    adversary_decode_rs,
    crg_broadcast,
    crg_scalar_c,
    crg_unpack,
    crg_zero_sum_set,
    crr_pairs,
    crr_refresh,
    db_dropout_compensation,
    dropout_compensation_psu,
    dropout_compensation_write,
    psu_client_answer,
    psu_db_aggregate,
    psu_decode_union,
    psu_route_answer,
    replica_databases,
    write_beta_answer,
    write_read_positions,
)
from src.utils.field_linalg import get_field, vandermonde


class CommonRandomnessTest(unittest.TestCase):
    def setUp(self):
        self.GF = get_field(13)

    def test_zero_sum_set(self):
        result = crg_zero_sum_set(self.GF([[1, 2], [3, 4]]), expected_contributors=2)
        self.assertEqual(result.tolist(), [4, 6, 3])
        self.assertEqual(int(np.sum(result.view(np.ndarray)) % 13), 0)

    def test_zero_sum_set_of_vectors(self):
        contributions = self.GF(np.arange(24).reshape(3, 2, 4) % 13)
        result = crg_zero_sum_set(contributions, 3)
        self.assertEqual(result.shape, (3, 4))
        self.assertTrue(np.array_equal(result.sum(axis=0), self.GF.Zeros(4)))

    def test_wrong_contributor_count(self):
        with self.assertRaises(WrongContributorCountError):
            crg_zero_sum_set(self.GF([[1, 2]]), expected_contributors=2)
        with self.assertRaises(WrongContributorCountError):
            crg_scalar_c(self.GF([3]), expected_contributors=2)

    def test_scalar_c(self):
        self.assertEqual(int(crg_scalar_c(self.GF([3, 5]))), 2)
        self.assertEqual(int(crg_scalar_c(self.GF([2, 7]), 2)), 1)
        with self.assertRaises(ZeroContributionError):
            crg_scalar_c(self.GF([3, 0]))

    def test_broadcast_cut_to_recipient(self):
        GF = self.GF
        client_rows = GF([[1, 2], [3, 4], [5, 6]])
        router_rows = GF([[7, 8]])
        c = GF(9)
        own = crg_broadcast(1, 2, Phase.PSU, 0, client_rows, router_rows, position=1, full=False, router=False, c=c)
        self.assertEqual(own.payload, [9, 3, 4])
        self.assertEqual(own.kind, MessageKind.CR_BROADCAST)
        self.assertEqual(own.meta["set"], "psu")
        full = crg_broadcast(1, 4, Phase.PSU, 0, client_rows, router_rows, position=3, full=True, router=True, c=c)
        self.assertEqual(full.payload, [9, 1, 2, 3, 4, 5, 6, 7, 8])
        c_out, rows, routers = crg_unpack(GF, full.payload, (3, 2), (1, 2), 3, True, True, True)
        self.assertEqual(int(c_out), 9)
        self.assertTrue(np.array_equal(rows, client_rows))
        self.assertTrue(np.array_equal(routers, router_rows))

    def test_unpack_length_mismatch(self):
        with self.assertRaises(InconsistentAnswerError):
            crg_unpack(self.GF, [1, 2, 3], (3, 2), (1, 2), 0, False, False, False)


class ServerRandomnessRefreshTest(unittest.TestCase):
    def test_refresh(self):
        GF = get_field(13)
        self.assertEqual(int(crr_refresh(GF(5), GF(9))), 1)
        with self.assertRaises(MissingShareError):
            crr_refresh(GF(5), None)

    def test_pairs_skip_odd_client(self):
        self.assertEqual(crr_pairs([5, 1, 3]), [(1, 3)])
        self.assertEqual(crr_pairs([4, 3, 2, 1]), [(1, 2), (3, 4)])
        self.assertEqual(crr_pairs([1]), [])


def make_client(GF, client_id, group, incidence, clients=(1, 2), groups=(1, 2), router=True):
    return ClientState(
        client_id=client_id,
        group=group,
        gamma=frozenset(k + 1 for k, v in enumerate(incidence) if v),
        incidence=GF(incidence),
        increments=GF.Zeros((len(incidence), 1)),
        is_router=router,
        crg_clients=tuple(clients),
        crg_groups=tuple(groups),
    )


class PrivateSetUnionTest(unittest.TestCase):
    """Two groups with one client each; both clients route."""

    def setUp(self):
        GF = self.GF = get_field(13)
        w = GF([[1, 2, 3], [12, 11, 10]])
        rw = GF([[4, 5, 6], [9, 8, 7]])
        self.clients = {}
        for i, incidence in ((1, [1, 0, 0]), (2, [0, 0, 1])):
            client = make_client(GF, i, i, incidence)
            client.c = GF(2)
            client.w_psu = w[i - 1]
            client.client_set_psu = w
            client.router_set_psu = rw
            self.clients[i] = client
        self.dbs = {
            j: DatabaseState(db_id=j, coded_store={}, rhat_psu=GF([5, 5, 5]), rhat_write=GF.Zeros((3, 1)))
            for j in (1, 2)
        }

    def route(self, group):
        client = self.clients[group]
        du2 = psu_db_aggregate(self.dbs[group], [psu_client_answer(client, group)], group, client.client_id)
        self.assertEqual(du2.meta["contributors"], [group])
        return psu_route_answer(client, self.GF(du2.payload), group, [1, 2])

    def test_union_decoded_by_every_database(self):
        answers = self.route(1) + self.route(2)
        for j in (1, 2):
            mine = [a for a in answers if a.receiver == f"DB{j}"]
            self.assertEqual(psu_decode_union(self.dbs[j], mine, [1, 2]), frozenset({1, 3}))

    def test_missing_group_without_compensation(self):
        mine = [a for a in self.route(1) if a.receiver == "DB1"]
        with self.assertRaises(MissingRouterAnswerError):
            psu_decode_union(self.dbs[1], mine, [1, 2])

    def test_missing_group_compensated(self):
        mine = [a for a in self.route(1) if a.receiver == "DB1"]
        comp = db_dropout_compensation(self.clients[1], {2: [2]}, 1, Phase.PSU)
        self.assertTrue(comp.remedy)
        self.assertEqual(psu_decode_union(self.dbs[1], mine, [1, 2], [comp]), frozenset({1}))

    def test_dropped_client_compensated_by_router(self):
        GF = self.GF
        w = GF([[1, 2, 3], [12, 11, 10]])
        router = make_client(GF, 1, 1, [1, 0, 0], groups=(1,))
        router.c = GF(2)
        router.w_psu = w[0]
        router.client_set_psu = w
        router.router_set_psu = GF([[0, 0, 0]])
        du2 = psu_db_aggregate(self.dbs[1], [psu_client_answer(router, 1)], 1, 1)
        answers = dropout_compensation_psu(router, psu_route_answer(router, GF(du2.payload), 1, [1]), [2])
        self.assertEqual(answers[0].meta["compensated"], [2])
        self.assertEqual(psu_decode_union(self.dbs[1], answers, [1]), frozenset({1}))

    def test_unknown_dropped_client(self):
        router = self.clients[1]
        with self.assertRaises(UnknownDroppedClientError):
            dropout_compensation_psu(router, [], [7])


class RandomUnionTest(unittest.TestCase):
    """Random desired sets over up to ten clients, decoded at one database."""

    TRIALS = 200

    def decode(self, GF, rng, incidences, n_groups):
        clients = sorted(incidences)
        groups = list(range(1, n_groups + 1))
        group_of = {i: (i - 1) % n_groups + 1 for i in clients}
        K = len(incidences[clients[0]])
        w = crg_zero_sum_set(GF(rng.integers(0, 13, size=(2, len(clients) - 1, K))), 2)
        rw = crg_zero_sum_set(GF(rng.integers(0, 13, size=(2, n_groups - 1, K))), 2)
        c = crg_scalar_c(GF(rng.integers(1, 13, size=2)))
        state = {}
        for i in clients:
            client = make_client(GF, i, group_of[i], incidences[i], clients=clients, groups=groups, router=i in groups)
            client.c = c
            client.w_psu = w[i - 1]
            client.client_set_psu = w
            client.router_set_psu = rw
            state[i] = client
        db = DatabaseState(
            db_id=1, coded_store={}, rhat_psu=GF(rng.integers(0, 13, size=K)), rhat_write=GF.Zeros((K, 1))
        )
        answers = []
        for g in groups:
            uploads = [psu_client_answer(state[i], 1) for i in clients if group_of[i] == g]
            du2 = psu_db_aggregate(db, uploads, g, g)
            answers += psu_route_answer(state[g], GF(du2.payload), g, [1])
        return psu_decode_union(db, answers, groups)

    def test_matches_set_union(self):
        GF = get_field(13)
        rng = np.random.default_rng(31)
        for trial in range(self.TRIALS):
            C = int(rng.integers(2, 11))
            K = int(rng.integers(1, 6))
            n_groups = int(rng.integers(2, C + 1))
            incidences = {i: rng.integers(0, 2, size=K).tolist() for i in range(1, C + 1)}
            expected = frozenset(k + 1 for row in incidences.values() for k, v in enumerate(row) if v)
            self.assertEqual(self.decode(GF, rng, incidences, n_groups), expected, trial)


class WriteCompensationTest(unittest.TestCase):
    def setUp(self):
        self.GF = get_field(13)
        self.psi = vandermonde(self.GF, [1, 2, 3, 4], 3)
        self.schedule = schedule_instances(plan_time_sharing(3, 2, Fraction(1, 2)), 2)
        self.router = make_client(self.GF, 1, 1, [1, 0, 1])
        self.router.client_set_write = self.GF(np.arange(24).reshape(2, 3, 4) % 13)

    def test_nobody_dropped(self):
        beta = dropout_compensation_write(self.router, [], self.schedule, [1, 3], self.psi, 2)
        self.assertEqual(beta.shape, (2, 2, 3))
        self.assertFalse(np.any(beta))

    def test_beta_is_a_remedy(self):
        msg = write_beta_answer(self.router, [2], self.schedule, [1, 3], self.psi, 2)
        self.assertTrue(msg.remedy)
        self.assertEqual(msg.meta["role"], "beta")
        self.assertEqual(msg.meta["clients"], [2])
        self.assertEqual(msg.length, 2 * 2 * 3)

    def test_unknown_dropped_client(self):
        with self.assertRaises(UnknownDroppedClientError):
            dropout_compensation_write(self.router, [5], self.schedule, [1], self.psi, 2)


class PlacementTest(unittest.TestCase):
    def test_replicas(self):
        self.assertEqual(replica_databases(3, [1, 2, 3, 4], 4, 0), [3])
        self.assertEqual(replica_databases(6, [1, 2, 3, 4, 5, 6, 7], 7, 1), [6, 7, 1])
        self.assertEqual(replica_databases(2, [1, 2, 4, 5, 6], 7, 1), [2, 4, 5])

    def test_read_positions_cover_download_cost(self):
        schedule = schedule_instances(plan_time_sharing(3, 2, Fraction(1, 2)), 2)
        requests = write_read_positions(schedule, [1, 3], 0, [1, 2, 3])
        total = sum(len(positions) for positions in requests.values())
        per_submodel = sum(layout.reconstruction_cost for layout in schedule.layouts)
        self.assertEqual(total, 2 * per_submodel)
        self.assertEqual(write_read_positions(schedule, [], 0, [1, 2, 3]), {})

    def test_adversarial_read_uses_more_databases(self):
        schedule = schedule_instances(plan_time_sharing(3, 1, Fraction(0)), 3)
        requests = write_read_positions(schedule, [1], 1, [1, 2, 3, 4, 5, 6])
        self.assertEqual(sorted(requests), [1, 2, 3, 4, 5])


class AdversaryDecodingTest(unittest.TestCase):
    def setUp(self):
        self.GF = get_field(13)

    def test_repetition_majority(self):
        GF = self.GF
        copies = [GF([1, 2, 3]), GF([9, 9, 9]), GF([1, 2, 3])]
        self.assertEqual(adversary_decode_repetition(copies, 1).tolist(), [1, 2, 3])

    def test_repetition_without_majority(self):
        GF = self.GF
        with self.assertRaises(NoMajorityError):
            adversary_decode_repetition([GF([1]), GF([2]), GF([3])], 1)
        with self.assertRaises(NoMajorityError):
            adversary_decode_repetition([GF([1]), GF([1])], 1)

    def test_reed_solomon_corrects_every_single_error(self):
        GF = self.GF
        xs = [1, 2, 3, 4]
        for a0 in range(13):
            for a1 in range(13):
                honest = [(a0 + a1 * x) % 13 for x in xs]
                self.assertEqual(adversary_decode_rs(GF, xs, honest, 2, 1).tolist(), [a0, a1])
                for position in range(4):
                    for error in range(1, 13):
                        ys = list(honest)
                        ys[position] = (ys[position] + error) % 13
                        self.assertEqual(adversary_decode_rs(GF, xs, ys, 2, 1).tolist(), [a0, a1])

    def test_reed_solomon_needs_enough_points(self):
        with self.assertRaises(DecodingFailureError):
            adversary_decode_rs(self.GF, [1, 2, 3], [1, 2, 3], 2, 1)

    def test_reed_solomon_without_adversary(self):
        self.assertEqual(adversary_decode_rs(self.GF, [1, 2, 3], [3, 5, 7], 2, 0).tolist(), [1, 2])


if __name__ == "__main__":
    unittest.main()
