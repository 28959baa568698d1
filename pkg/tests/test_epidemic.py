import numpy as np
import pytest

from bcilm import (DataFormatError, EpidemicHistory, PeriodSpec, load_events,
                   save_events)

from oracle import state_at


class TestStateOf:
    def test_never_infected_always_susceptible(self, tiny_history):
        for t in range(1, 7):
            assert tiny_history.state_of(2, t) == "S"

    def test_sir_boundaries(self):
        # infection event at 4 with a 3-step infectious period
        h = EpidemicHistory("sir", 1, 1, 10, infection_times=[4],
                            removal_times=[7])
        states = {t: h.state_of(0, t) for t in range(1, 11)}
        assert [states[t] for t in (4, 5, 6, 7, 8)] == ["S", "I", "I", "I", "R"]

    def test_seir_boundaries(self):
        # exposure at 10, five exposed steps, four infectious steps
        h = EpidemicHistory("seir", 1, 1, 25, exposure_times=[10],
                            infection_times=[15], removal_times=[19])
        assert h.state_of(0, 10) == "S"
        assert all(h.state_of(0, t) == "E" for t in range(11, 16))
        assert all(h.state_of(0, t) == "I" for t in range(16, 20))
        assert h.state_of(0, 20) == "R"

    def test_matches_first_principles_rule(self, tiny_history):
        for i in range(5):
            tr = tiny_history.transitions(i)
            for t in range(1, 7):
                expected = state_at("sir", tr.exposure_time,
                                    tr.infection_time, tr.removal_time, t)
                assert tiny_history.state_of(i, t) == expected

    def test_outside_window_rejected(self, tiny_history):
        with pytest.raises(ValueError, match="outside"):
            tiny_history.state_of(0, 0)
        with pytest.raises(ValueError, match="outside"):
            tiny_history.state_of(0, 7)

    def test_counts_partition_population(self, tiny_history):
        for t in range(1, 7):
            counts = tiny_history.compartment_counts(t)
            assert sum(counts.values()) == 5


class TestOrderingValidation:
    def test_removal_before_infection_rejected(self):
        with pytest.raises(ValueError, match="individual 0"):
            EpidemicHistory("sir", 1, 1, 5, infection_times=[4],
                            removal_times=[3])

    def test_seir_exposure_after_infection_rejected(self):
        with pytest.raises(ValueError, match="individual 0"):
            EpidemicHistory("seir", 1, 1, 9, exposure_times=[5],
                            infection_times=[5], removal_times=[8])

    def test_seir_infection_without_exposure_rejected(self):
        with pytest.raises(ValueError, match="individual 0"):
            EpidemicHistory("seir", 1, 1, 9, infection_times=[5],
                            removal_times=[8])


class TestIncidence:
    def test_new_infections_by_hand(self, tiny_history):
        assert tiny_history.new_infections(1) == set()
        assert tiny_history.new_infections(2) == {1}
        assert tiny_history.new_infections(4) == {3}

    def test_seeds_not_counted(self, tiny_history):
        # individual 0 seeded at event time 0, before the window
        for t in range(1, 6):
            assert 0 not in tiny_history.new_infections(t)

    def test_brute_force_set_difference(self, tiny_history):
        h = tiny_history
        for t in range(1, 6):
            now = {i for i in range(5) if h.state_of(i, t) == "I"}
            nxt = {i for i in range(5) if h.state_of(i, t + 1) == "I"}
            assert h.new_infections(t) == nxt - now

    def test_curve_matches_counts(self, tiny_history):
        curve = tiny_history.epidemic_curve()
        assert curve.tolist() == [0, 1, 0, 1, 0]

    def test_curve_conservation(self, tiny_history):
        assert tiny_history.epidemic_curve().sum() == \
            tiny_history.total_infected(include_initial=False)

    def test_empty_epidemic_all_zero(self):
        h = EpidemicHistory("sir", 4, 1, 8)
        assert np.all(h.epidemic_curve() == 0)

    def test_curve_bounded_by_susceptibles(self, tiny_history):
        curve = tiny_history.epidemic_curve()
        for k, t in enumerate(range(1, 6)):
            assert 0 <= curve[k] <= tiny_history.compartment_counts(t)["S"]


class TestPeriodSpec:
    def test_validates_periods(self):
        with pytest.raises(ValueError):
            PeriodSpec(0)
        with pytest.raises(ValueError):
            PeriodSpec(3, exposed_period=0)

    def test_removal_override_truncates(self):
        periods = PeriodSpec(5, removal_overrides={7: 12})
        assert periods.removal_time(7, 10) == 12
        assert periods.removal_time(8, 10) == 15

    def test_override_never_before_one_infectious_step(self):
        periods = PeriodSpec(5, removal_overrides={7: 9})
        assert periods.removal_time(7, 10) == 11

    def test_later_override_ignored(self):
        periods = PeriodSpec(3, removal_overrides={0: 99})
        assert periods.removal_time(0, 10) == 13


class TestEventsIO:
    def test_round_trip(self, tmp_path, tiny_history):
        path = tmp_path / "events.csv"
        save_events(tiny_history, path)
        loaded = load_events(path, 5, "sir", 1, 6)
        for i in range(5):
            assert loaded.transitions(i) == tiny_history.transitions(i)

    def test_seir_round_trip(self, tmp_path):
        h = EpidemicHistory("seir", 3, 1, 20,
                            exposure_times=[0, 4, None],
                            infection_times=[5, 9, None],
                            removal_times=[9, 13, None])
        path = tmp_path / "events.csv"
        save_events(h, path)
        loaded = load_events(path, 3, "seir", 1, 20)
        for i in range(3):
            assert loaded.transitions(i) == h.transitions(i)

    def test_ordering_violation_names_individual(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,exposure_time,infection_time,removal_time\n"
                        "0,,4,2\n1,,,\n")
        with pytest.raises(DataFormatError, match="individual 0"):
            load_events(path, 2, "sir", 1, 8)

    def test_missing_individual_errors(self, tmp_path):
        path = tmp_path / "short.csv"
        path.write_text("id,exposure_time,infection_time,removal_time\n"
                        "0,,1,4\n")
        with pytest.raises(DataFormatError, match="missing"):
            load_events(path, 3, "sir", 1, 8)

    def test_duplicate_id_rejected(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text("id,exposure_time,infection_time,removal_time\n"
                        "0,,1,4\n0,,,\n")
        with pytest.raises(DataFormatError, match="duplicate"):
            load_events(path, 1, "sir", 1, 8)
