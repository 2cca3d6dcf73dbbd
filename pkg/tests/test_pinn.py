import numpy as np
import pytest

from dispinn import dynamics, rom
from dispinn.dynamics import BurgersConfig, MassSpringSetup, RigidBodyParams
from dispinn.errors import (
    ConfigError,
    JacobianError,
    StaleJacobianWarning,
    TrainingError,
    UndefinedMetricError,
)
from dispinn.pinn import (
    BurgersProvider,
    NetworkSpec,
    ReducedBurgersProvider,
    RigidBodyProvider,
    TrainConfig,
    TrainingProblem,
    assemble_residuals,
    data_loss,
    detach,
    fd_jacobian,
    physics_loss,
    predict,
    relative_error,
    run_trials,
    train_detached,
    train_in_graph,
)
from dispinn.pinn.training import _RiseMonitor, RISE_STREAK_LIMIT, train


def burgers_reference(cfg=None):
    cfg = cfg or BurgersConfig()
    traj = dynamics.burgers_march(cfg)
    return cfg, traj


def full_burgers_provider(cfg):
    return BurgersProvider(cfg, pairs=np.arange(cfg.n_t - 1), n_rows=cfg.n_t)


def burgers_problem(cfg, traj, provider, anchors=(0,)):
    return TrainingProblem(
        inputs=traj.times[:, None],
        targets=traj.states.T.copy(),
        provider=provider,
        anchors=anchors,
        bc_columns=(0, cfg.n_x - 1),
        name="burgers",
    )


def small_net_spec():
    return NetworkSpec(kind="mlp", hidden_layers=(16, 12))


class TestDataLoss:
    def test_exact_prediction(self):
        y = np.arange(12.0).reshape(4, 3)
        assert data_loss(y, y, [0, 2]) == 0.0

    def test_single_point(self):
        assert data_loss([[3.0]], [[1.0]], [0]) == pytest.approx(4.0)

    def test_two_points_mean(self):
        pred = np.array([[1.0], [4.0]])
        actual = np.array([[0.0], [1.0]])
        assert data_loss(pred, actual, [0, 1]) == pytest.approx(5.0)

    def test_empty_indices(self):
        with pytest.raises(ConfigError):
            data_loss(np.ones((3, 1)), np.ones((3, 1)), [])


class TestPhysicsLoss:
    def test_zero_residual(self):
        assert physics_loss(np.zeros(10), 5) == 0.0

    def test_single_entry(self):
        assert physics_loss(np.array([2.0]), 1) == pytest.approx(4.0)

    def test_exact_trajectory(self):
        cfg, traj = burgers_reference()
        provider = full_burgers_provider(cfg)
        r = assemble_residuals(traj.states.T, provider)
        assert physics_loss(r, provider.n_eqn) <= 1e-12


class TestRelativeError:
    def test_exact(self):
        assert relative_error([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_zero_prediction(self):
        assert relative_error([0.0, 0.0], [3.0, 4.0]) == pytest.approx(1.0)

    def test_double_prediction(self):
        actual = np.array([1.0, -2.0, 0.5])
        assert relative_error(2.0 * actual, actual) == pytest.approx(1.0)

    def test_zero_reference(self):
        with pytest.raises(UndefinedMetricError):
            relative_error([1.0], [0.0])


class TestAssembleResiduals:
    def test_marched_trajectory_zero(self):
        cfg, traj = burgers_reference()
        provider = full_burgers_provider(cfg)
        r = assemble_residuals(traj.states.T, provider)
        assert np.abs(r).max() <= 1e-10

    def test_rigid_body_marched_zero(self):
        setup = MassSpringSetup(params=RigidBodyParams(n_steps=300))
        traj = dynamics.rigid_body_march(setup.params, setup.forcing(), setup.initial())
        provider = RigidBodyProvider(
            setup.params, setup.forcing(), newest=np.arange(4, 299), n_rows=300
        )
        r = assemble_residuals(traj.states[:2].T.copy(), provider)
        assert np.abs(r).max() <= 1e-10

    def test_perturbation_touches_only_stencil_rows(self):
        cfg, traj = burgers_reference()
        provider = full_burgers_provider(cfg)
        y = traj.states.T.copy()
        base = provider.residual(y)
        y[50, 7] += 1e-3
        moved = provider.residual(y)
        changed = np.nonzero(np.abs(moved - base) > 0)[0]
        rows = np.unique(changed // cfg.n_x)
        cols = np.unique(changed % cfg.n_x)
        assert set(rows) <= {49, 50}  # pairs (49,50) and (50,51)
        assert set(cols) <= {6, 7, 8}

    def test_reduced_complete_basis_is_projected_full(self):
        cfg, traj = burgers_reference()
        snaps = dynamics.generate_snapshots(cfg)
        basis = rom.compute_pod(snaps, n_modes=cfg.n_x)
        reduced = dynamics.build_reduced(cfg, basis)
        pairs = np.arange(cfg.n_t - 1)
        full = BurgersProvider(cfg, pairs, n_rows=cfg.n_t)
        red = ReducedBurgersProvider(reduced, pairs, n_rows=cfg.n_t)
        rng = np.random.default_rng(0)
        y_full = traj.states.T + 0.01 * rng.normal(size=(cfg.n_t, cfg.n_x))
        y_full[:, 0] = y_full[:, -1] = 0.0
        y_hat = y_full @ basis.modes
        r_full = full.residual(y_full).reshape(-1, cfg.n_x)
        r_red = red.residual(y_hat).reshape(-1, cfg.n_x)
        np.testing.assert_allclose(r_red, r_full @ basis.modes, atol=1e-10)

    def test_provider_vjp_matches_fd_jacobian(self):
        # dual-route check: analytic VJP against the probed Jacobian
        cfg = BurgersConfig(n_x=8, n_t=12)
        traj = dynamics.burgers_march(cfg)
        rng = np.random.default_rng(1)
        for provider in (
            BurgersProvider(cfg, pairs=np.arange(cfg.n_t - 1), n_rows=cfg.n_t),
            ReducedBurgersProvider(
                dynamics.build_reduced(
                    cfg, rom.compute_pod(dynamics.generate_snapshots(cfg), n_modes=4)
                ),
                pairs=np.arange(cfg.n_t - 1),
                n_rows=cfg.n_t,
            ),
        ):
            y = rng.normal(size=(provider.n_rows, provider.out_dim)) * 0.3
            upstream = rng.normal(size=provider.n_eqn * provider.out_dim)
            analytic = provider.residual_vjp(y, upstream)
            probed = fd_jacobian(provider.residual, y).vjp(upstream).reshape(y.shape)
            np.testing.assert_allclose(analytic, probed, rtol=1e-4, atol=1e-8)

    def test_rigid_body_vjp_matches_fd_jacobian(self):
        setup = MassSpringSetup(params=RigidBodyParams(n_steps=40))
        provider = RigidBodyProvider(
            setup.params, setup.forcing(), newest=np.arange(4, 39), n_rows=40
        )
        rng = np.random.default_rng(2)
        y = rng.normal(size=(40, 2))
        upstream = rng.normal(size=provider.n_eqn * 2)
        analytic = provider.residual_vjp(y, upstream)
        probed = fd_jacobian(provider.residual, y).vjp(upstream).reshape(y.shape)
        np.testing.assert_allclose(analytic, probed, rtol=1e-5, atol=1e-8)


class TestFdJacobian:
    def test_linear_residual_exact(self):
        rng = np.random.default_rng(3)
        m = rng.normal(size=(6, 4))
        c = rng.normal(size=6)
        jac = fd_jacobian(lambda y: m @ y.ravel() + c, np.zeros(4))
        np.testing.assert_allclose(jac.to_dense(), m, atol=1e-8)

    def test_burgers_sparsity_oracle(self):
        cfg = BurgersConfig(n_x=10, n_t=6)
        traj = dynamics.burgers_march(cfg)
        provider = full_burgers_provider(cfg)
        jac = fd_jacobian(provider.residual, traj.states.T)
        dense = jac.to_dense()
        n_x = cfg.n_x
        for row in range(dense.shape[0]):
            pair, i = divmod(row, n_x)
            for col in np.nonzero(np.abs(dense[row]) > 1e-12)[0]:
                step, j = divmod(col, n_x)
                assert step in (pair, pair + 1)
                assert abs(int(j) - int(i)) <= 1

    def test_directional_derivative(self):
        cfg = BurgersConfig(n_x=8, n_t=10)
        traj = dynamics.burgers_march(cfg)
        provider = full_burgers_provider(cfg)
        y = traj.states.T
        jac = fd_jacobian(provider.residual, y)
        rng = np.random.default_rng(4)
        delta = 1e-4 * rng.normal(size=y.size)
        lhs = jac.matvec(delta)
        rhs = provider.residual(y + delta.reshape(y.shape)) - provider.residual(y)
        scale = np.abs(rhs).max()
        np.testing.assert_allclose(lhs, rhs, atol=1e-4 * max(scale, 1e-12))

    def test_non_finite_probe(self):
        def bad(y):
            with np.errstate(invalid="ignore"):
                return np.sqrt(y.ravel())  # NaN on the downward probe

        with pytest.raises(JacobianError, match="column 0"):
            fd_jacobian(bad, np.zeros(1))


class TestDetachedEquivalence:
    def test_k1_gradients_match_in_graph(self):
        cfg = BurgersConfig(n_x=10, n_t=20)
        traj = dynamics.burgers_march(cfg)
        provider = full_burgers_provider(cfg)
        rng = np.random.default_rng(5)
        from dispinn.neural import Mlp, init_mlp

        net = Mlp(init_mlp([1, 8, cfg.n_x], rng))
        x = traj.times[:, None] / traj.times[-1]
        y = net.forward(x)
        n_eqn = provider.n_eqn

        resid = provider.residual(y)
        grad_in = net.backward(provider.residual_vjp(y, (2.0 / n_eqn) * resid))

        net.forward(x)
        jac = provider.jacobian(y)
        grad_det = net.backward(
            ((2.0 / n_eqn) * jac.vjp(resid)).reshape(y.shape)
        )
        for key in grad_in:
            tol = 1e-6 * np.maximum(np.abs(grad_in[key]), np.abs(grad_det[key])) + 1e-12
            assert np.all(np.abs(grad_in[key] - grad_det[key]) <= tol), key

    def test_zero_residual_zero_l_dis(self):
        cfg, traj = burgers_reference()
        provider = full_burgers_provider(cfg)
        y = traj.states.T
        jac = provider.jacobian(y)
        resid = provider.residual(y)
        g = (2.0 / provider.n_eqn) * jac.vjp(resid)
        assert abs(g @ y.ravel()) <= 1e-12
        assert np.abs(g).max() <= 1e-10


class TestTrainingLoops:
    def make_problem(self, cfg_override=None, w_phys=1.0, n_t=24):
        cfg = cfg_override or BurgersConfig(n_x=10, n_t=n_t)
        traj = dynamics.burgers_march(cfg)
        provider = full_burgers_provider(cfg)
        problem = burgers_problem(cfg, traj, provider)
        train_cfg = TrainConfig(
            epochs=60,
            learning_rate=0.01,
            network=small_net_spec(),
            data_point_indices=(cfg.n_t // 2,),
            loss_weights=(1.0, w_phys),
            seed=3,
        )
        return cfg, problem, train_cfg

    def test_losses_decrease_in_graph(self):
        _, problem, cfg = self.make_problem()
        net, report = train_in_graph(cfg, problem)
        assert report.mse_physics[-1] < report.mse_physics[0]
        assert len(report) == cfg.epochs

    def test_pure_regression_decreases(self):
        _, problem, cfg = self.make_problem(w_phys=0.0)
        cfg = TrainConfig(
            epochs=100,
            learning_rate=0.0005,
            network=small_net_spec(),
            data_point_indices=tuple(range(24)),
            loss_weights=(1.0, 0.0),
            seed=3,
        )
        net, report = train_in_graph(cfg, problem)
        assert np.all(np.diff(report.mse_data) < 0.0)
        assert np.all(np.isnan(report.l_dis))

    def test_detached_matches_in_graph_trajectory_k1(self):
        _, problem, cfg = self.make_problem()
        net_a, rep_a = train_in_graph(cfg, problem)
        net_b, rep_b = train_detached(cfg, problem)
        # k=1 keeps the Jacobian fresh; the runs should track closely
        np.testing.assert_allclose(
            rep_a.mse_physics[-1], rep_b.mse_physics[-1], rtol=1e-6
        )
        tree_a, tree_b = net_a.params.tree(), net_b.params.tree()
        for key in tree_a:
            np.testing.assert_allclose(tree_a[key], tree_b[key], rtol=1e-5, atol=1e-10)

    def test_detached_reports_l_dis(self):
        _, problem, cfg = self.make_problem()
        _, report = train_detached(cfg, problem)
        assert np.all(np.isfinite(report.l_dis))

    def test_refresh_only_mode_skips_off_epochs(self):
        _, problem, cfg = self.make_problem()
        cfg = TrainConfig(
            epochs=10,
            learning_rate=0.01,
            network=small_net_spec(),
            data_point_indices=(5,),
            jacobian_interval=4,
            physics_update="refresh_only",
            seed=3,
        )
        _, report = train_detached(cfg, problem)
        finite = np.isfinite(report.l_dis)
        np.testing.assert_array_equal(np.nonzero(finite)[0], [0, 4, 8])

    def test_divergence_raises_with_epoch(self):
        cfg = BurgersConfig(n_x=10, n_t=24)
        traj = dynamics.burgers_march(cfg)
        problem = burgers_problem(cfg, traj, full_burgers_provider(cfg))
        bad_cfg = TrainConfig(
            epochs=5,
            learning_rate=1e80,  # one update each of this size overflows u^2
            network=small_net_spec(),
            data_point_indices=(3,),
            seed=0,
        )
        with pytest.raises(TrainingError, match="epoch"):
            train_in_graph(bad_cfg, problem)

    def test_seeded_run_bit_identical(self):
        _, problem, cfg = self.make_problem()
        net_a, _ = train_in_graph(cfg, problem)
        net_b, _ = train_in_graph(cfg, problem)
        for key, val in net_a.params.tree().items():
            np.testing.assert_array_equal(val, net_b.params.tree()[key])

    def test_trajectory_exact_outputs_zero_physics_everywhere(self):
        # a provider in every mode scores ~0 on the matching forward solution
        cfg, traj = burgers_reference()
        snaps = dynamics.generate_snapshots(cfg)
        basis = rom.compute_pod(snaps, n_modes=10)
        nl = dynamics.convective_snapshots(cfg, snaps)
        hyper = rom.build_deim_operator(basis, nl, m_h=10)
        pairs = np.arange(cfg.n_t - 1)

        full = full_burgers_provider(cfg)
        assert physics_loss(full.residual(traj.states.T), full.n_eqn) <= 1e-12

        red_plain = dynamics.build_reduced(cfg, basis)
        traj_red = dynamics.reduced_march(cfg, basis)
        prov_red = ReducedBurgersProvider(red_plain, pairs, n_rows=cfg.n_t)
        assert physics_loss(prov_red.residual(traj_red.states.T), prov_red.n_eqn) <= 1e-12

        red_hyper = dynamics.build_reduced(cfg, basis, hyper)
        traj_h = dynamics.reduced_march(cfg, basis, hyper)
        prov_h = ReducedBurgersProvider(red_hyper, pairs, n_rows=cfg.n_t)
        assert physics_loss(prov_h.residual(traj_h.states.T), prov_h.n_eqn) <= 1e-12

        det = detach(full)
        assert physics_loss(det.residual(traj.states.T), det.n_eqn) <= 1e-12

    def test_detached_provider_hides_graph(self):
        cfg, traj = burgers_reference()
        det = detach(full_burgers_provider(cfg))
        assert not det.graph_attached
        assert not hasattr(det, "residual_vjp")
        cfg_train = TrainConfig(
            epochs=2,
            learning_rate=0.01,
            network=small_net_spec(),
            data_point_indices=(5,),
            seed=0,
        )
        problem = burgers_problem(cfg, traj, det)
        with pytest.raises(ConfigError):
            train_in_graph(cfg_train, problem)
        train_detached(cfg_train, problem)  # value exchange is enough


class TestRiseMonitor:
    def test_warns_after_streak(self):
        mon = _RiseMonitor(interval=2000)
        mon.update(1.0)
        with pytest.warns(StaleJacobianWarning, match="k=2000"):
            for i in range(RISE_STREAK_LIMIT):
                mon.update(2.0 + i)

    def test_reset_on_decrease(self):
        mon = _RiseMonitor(interval=10)
        for i in range(RISE_STREAK_LIMIT * 2):
            mon.update(float(i % 5))
        assert not mon.warned


class TestRunTrials:
    def base(self, epochs=60):
        cfg = BurgersConfig(n_x=10, n_t=24)
        traj = dynamics.burgers_march(cfg)
        problem = burgers_problem(cfg, traj, full_burgers_provider(cfg))
        train_cfg = TrainConfig(
            epochs=epochs,
            learning_rate=0.02,
            network=small_net_spec(),
            seed=11,
        )
        return problem, train_cfg

    def test_single_trial_degenerate_stats(self):
        problem, cfg = self.base(epochs=20)
        stats = run_trials(cfg, problem, n_trials=1, data_point_count=2, channel=4)
        assert stats.e_mean == stats.e_max == stats.e_min

    def test_full_supervision_small_spread(self):
        problem, cfg = self.base(epochs=500)
        stats = run_trials(
            cfg, problem, n_trials=3, data_point_count=problem.n_rows - 1, channel=4
        )
        assert stats.e_max - stats.e_min <= 0.05

    def test_loss_report_roundtrip(self, tmp_path):
        problem, _ = self.base(epochs=8)
        _, report = train(
            TrainConfig(
                epochs=8,
                learning_rate=0.02,
                network=small_net_spec(),
                data_point_indices=(3,),
                seed=11,
            ),
            problem,
        )
        path = tmp_path / "loss.csv"
        report.to_csv(path)
        loaded = type(report).from_csv(path)
        np.testing.assert_array_equal(loaded.mse_data, report.mse_data)
        np.testing.assert_array_equal(loaded.mse_physics, report.mse_physics)
