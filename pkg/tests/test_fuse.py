import math

import pytest
from hypothesis import given, strategies as st

from servokit.errors import (
    CalibrationError,
    InfeasibleFuseError,
    UnknownAccelError,
    ValidationError,
)
from servokit.fuse import LoadModel, bus_load, calibrate_inrush, max_torque, synthesize_fuses

# Inrush entries solved from the two published bus operating points
# (5 servos, tau 650, alpha 20 -> 9.84 A; 3 servos, tau 450, alpha 40 -> 4.90 A).
D20 = 9.84 / 5 - 2.52 * 0.650 - 0.18
D40 = 4.90 / 3 - 2.52 * 0.450 - 0.18
MODEL = LoadModel(inrush={20: D20, 40: D40, 0: 0.0})


def oracle_load(n, tau, d):
    # Independent arithmetic for the load formula.
    return n * (2.52 * tau / 1000.0 + 0.18 + d)


def oracle_invert(limit, n, d):
    # Algebraic inversion, unfloored.
    return (limit / n - 0.18 - d) / 2.52 * 1000.0


class TestBusLoad:
    def test_bus_a_operating_point(self):
        assert bus_load(MODEL, 5, 650, 20) == pytest.approx(9.84, abs=0.005)

    def test_bus_b_operating_point(self):
        assert bus_load(MODEL, 3, 450, 40) == pytest.approx(4.90, abs=0.005)

    def test_single_idle_servo(self):
        assert bus_load(MODEL, 1, 0, 0) == pytest.approx(0.18, abs=1e-12)

    def test_unknown_alpha_is_error_not_interpolation(self):
        with pytest.raises(UnknownAccelError):
            bus_load(MODEL, 1, 100, 30)

    def test_interpolation_only_when_enabled(self):
        interp = LoadModel(inrush={20: D20, 40: D40}, interpolate=True)
        d30 = interp.d_of(30)
        assert d30 == pytest.approx((D20 + D40) / 2, rel=1e-12)
        with pytest.raises(UnknownAccelError):
            interp.d_of(50)  # outside the calibrated hull

    def test_tau_out_of_range(self):
        with pytest.raises(ValidationError):
            bus_load(MODEL, 1, 1001, 20)

    def test_n_active_positive(self):
        with pytest.raises(ValidationError):
            bus_load(MODEL, 0, 100, 20)

    @given(
        n=st.integers(min_value=1, max_value=17),
        tau=st.integers(min_value=0, max_value=999),
    )
    def test_strictly_increasing_in_tau_and_n(self, n, tau):
        assert bus_load(MODEL, n, tau + 1, 20) > bus_load(MODEL, n, tau, 20)
        assert bus_load(MODEL, n + 1, tau, 20) > bus_load(MODEL, n, tau, 20)

    @given(
        n=st.integers(min_value=1, max_value=17),
        tau=st.integers(min_value=0, max_value=1000),
    )
    def test_matches_oracle(self, n, tau):
        assert bus_load(MODEL, n, tau, 40) == pytest.approx(oracle_load(n, tau, D40), rel=1e-12)


class TestMaxTorque:
    def test_bus_a_inversion(self):
        # Oracle: floor(oracle_invert(10, 5, D20)) = floor(662.698) = 662.
        assert math.floor(oracle_invert(10.0, 5, D20)) == 662
        cap = max_torque(MODEL, 10.0, 5, 20)
        assert cap == 662
        # The published setting of 650 sits below the admissible cap.
        assert 650 <= cap

    def test_bus_b_inversion(self):
        # Oracle over the same floats: 463.227 -> 463 (the published 450
        # includes extra margin, like 650 vs 662 on the other bus).
        assert math.floor(oracle_invert(5.0, 3, D40)) == 463
        cap = max_torque(MODEL, 5.0, 3, 40)
        assert cap == 463
        assert 450 <= cap

    def test_inverting_at_observed_load_recovers_published_cap(self):
        # The calibration made bus_load(3, 450, 40) equal 4.90 exactly, so
        # inverting at 4.90 A returns exactly 450.
        assert max_torque(MODEL, 4.90, 3, 40) == 450

    def test_boundary_budget_gives_zero(self):
        limit = 2 * (0.18 + D20)  # exactly the zero-torque draw
        assert max_torque(MODEL, limit, 2, 20) == 0

    def test_infeasible_reports_minimum_load(self):
        with pytest.raises(InfeasibleFuseError) as exc:
            max_torque(MODEL, 0.1, 5, 20)
        assert exc.value.min_load_a == pytest.approx(5 * (0.18 + D20), rel=1e-12)

    def test_clamped_to_register_range(self):
        assert max_torque(MODEL, 100.0, 1, 0) == 1000

    @given(
        limit=st.floats(min_value=0.5, max_value=12.0),
        n=st.integers(min_value=1, max_value=6),
    )
    def test_inversion_tightness(self, limit, n):
        try:
            cap = max_torque(MODEL, limit, n, 20)
        except InfeasibleFuseError:
            assert limit / n < 0.18 + D20
            return
        assert bus_load(MODEL, n, cap, 20) <= limit
        if cap < 1000:
            assert bus_load(MODEL, n, cap + 1, 20) > limit

    @given(n=st.integers(min_value=1, max_value=16))
    def test_decreasing_in_n_active(self, n):
        assert max_torque(MODEL, 10.0, n + 1, 20) <= max_torque(MODEL, 10.0, n, 20)

    def test_decreasing_in_inrush(self):
        assert max_torque(MODEL, 5.0, 3, 40) <= max_torque(MODEL, 5.0, 3, 20)


class TestCalibrateInrush:
    def test_bus_a_row(self):
        table = calibrate_inrush(0.18, 2.52, [(5, 650, 20, 9.84)])
        assert table[20] == pytest.approx(0.150, abs=1e-9)

    def test_bus_b_row(self):
        table = calibrate_inrush(0.18, 2.52, [(3, 450, 40, 4.90)])
        assert table[40] == pytest.approx(0.319333333, abs=1e-8)

    def test_stall_endpoint_row(self):
        # A single servo at full torque drawing exactly stall current
        # solves to zero inrush.
        table = calibrate_inrush(0.18, 2.52, [(1, 1000, 5, 2.70)])
        assert table[5] == pytest.approx(0.0, abs=1e-12)

    def test_idempotence_reproduces_rows(self):
        rows = [(5, 650, 20, 9.84), (3, 450, 40, 4.90), (1, 1000, 5, 2.70)]
        table = calibrate_inrush(0.18, 2.52, rows)
        model = LoadModel(inrush=table)
        for n, tau, alpha, observed in rows:
            assert abs(bus_load(model, n, tau, alpha) - observed) <= 1e-6

    def test_negative_inrush_reported_not_clamped(self):
        with pytest.raises(CalibrationError, match="negative"):
            calibrate_inrush(0.18, 2.52, [(5, 650, 20, 1.0)])

    def test_duplicate_alpha_rejected(self):
        with pytest.raises(CalibrationError, match="duplicate"):
            calibrate_inrush(0.18, 2.52, [(5, 650, 20, 9.84), (5, 600, 20, 9.0)])

    @given(
        n=st.integers(min_value=1, max_value=17),
        tau=st.integers(min_value=0, max_value=1000),
        d=st.floats(min_value=0.0, max_value=1.0),
    )
    def test_round_trip_any_row(self, n, tau, d):
        observed = oracle_load(n, tau, d)
        table = calibrate_inrush(0.18, 2.52, [(n, tau, 7, observed)])
        model = LoadModel(inrush=table)
        assert abs(bus_load(model, n, tau, 7) - observed) <= 1e-6

    def test_inrush_not_monotone_in_alpha(self):
        # The two calibrated entries come out with D(20) < D(40); no
        # monotonicity in alpha is asserted anywhere, on purpose.
        assert D20 < D40


class TestSynthesizeFuses:
    def test_reference_topology(self, topology, load_model):
        fuses = {f.bus_id: f for f in synthesize_fuses(topology, load_model)}
        assert fuses["bus_a"].torque_cap == 662
        assert fuses["bus_b"].torque_cap == 463
        # Predicted load and headroom at the configured operating points.
        assert fuses["bus_a"].predicted_load == pytest.approx(9.84, abs=0.005)
        assert fuses["bus_b"].predicted_load == pytest.approx(4.90, abs=0.005)
        assert fuses["bus_a"].headroom == pytest.approx(0.16, abs=0.005)
        assert fuses["bus_b"].headroom == pytest.approx(0.10, abs=0.005)
        assert fuses["bus_a"].port_limit == pytest.approx(10.0)
        assert fuses["bus_b"].port_limit == pytest.approx(5.0)

    def test_caps_respect_port_limits(self, topology, load_model):
        for fuse in synthesize_fuses(topology, load_model):
            bus = topology.bus(fuse.bus_id)
            load = bus_load(load_model, bus.active_count, fuse.torque_cap, bus.accel_setting)
            assert load <= fuse.port_limit

    def test_margin_subtracts_registers(self, topology, load_model):
        fuses = {f.bus_id: f for f in synthesize_fuses(topology, load_model, margin_registers=12)}
        assert fuses["bus_a"].torque_cap == 650
        assert fuses["bus_b"].torque_cap == 451

    def test_all_seventeen_on_one_port_is_near_zero(self, topology, load_model):
        # The original failure: every servo behind a single 10 A port.
        from servokit.model import BusConfig, PowerTopology

        all_ids = tuple(a.id for a in topology.actuators)
        merged = PowerTopology(
            actuators=topology.actuators,
            ports=topology.ports,
            buses=(
                BusConfig(
                    id="all",
                    port_id="usbc2",
                    actuator_ids=all_ids,
                    active_count=17,
                    torque_cap=650,
                    accel_setting=20,
                ),
            ),
            compute_loads=(),
            battery_wh=288.0,
        )
        assert bus_load(load_model, 17, 650, 20) > 10.0  # uncapped demand blows the port
        (fuse,) = synthesize_fuses(merged, load_model)
        assert fuse.torque_cap <= 150

    def test_zero_buses_gives_empty_list(self, topology, load_model):
        from servokit.model import PowerTopology

        empty = PowerTopology(
            actuators=topology.actuators,
            ports=topology.ports,
            buses=(),
            compute_loads=topology.compute_loads,
            battery_wh=288.0,
        )
        assert synthesize_fuses(empty, load_model) == []

    def test_compute_share_reduces_budget(self, topology, load_model):
        # Move compute onto bus_b's port: the arm budget shrinks by 2.08 A.
        from servokit.model import ComputeLoad, PowerTopology

        shared = PowerTopology(
            actuators=topology.actuators,
            ports=topology.ports,
            buses=topology.buses,
            compute_loads=(ComputeLoad(name="jetson", steady_current=2.0833333333333335, port_id="car_outlet"),),
            battery_wh=288.0,
        )
        fuses = {f.bus_id: f for f in synthesize_fuses(shared, load_model)}
        assert fuses["bus_b"].port_limit == pytest.approx(5.0 - 2.0833333333333335)
        assert fuses["bus_b"].torque_cap < 463
