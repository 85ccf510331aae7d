"""scikit-learn style front end.

All three estimators regress ``u(x)`` for the advection-diffusion problem:
``fit`` solves (or trains) and ``predict(X)`` evaluates the solution at the
points in ``X`` (shape ``(n,)`` or ``(n, 1)``).
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .fom import choose_scheme, interpolate, solve_fd
from .network import init_params
from .optim import Adam
from .pinn import DbcMode, LossWeights, Snapshot, SubdomainPinn, train_epochs, transform_solution
from .problem import BvpSpec
from .schwarz import SchwarzConfig, run
from .validation import check_points, check_targets

__all__ = ["FiniteDifferenceSolver", "PINNRegressor", "SchwarzSolver"]


class FiniteDifferenceSolver(RegressorMixin, BaseEstimator):
    """Finite-difference solve on ``(0, 1)``; ``X`` and ``y`` are ignored by ``fit``.

    ``scheme="auto"`` picks ``upwind2`` when ``h * pe > 2`` and ``central``
    otherwise.
    """

    def __init__(self, pe=10.0, n_cells=1024, scheme="auto", bc_left=0.0, bc_right=0.0):
        self.pe = pe
        self.n_cells = n_cells
        self.scheme = scheme
        self.bc_left = bc_left
        self.bc_right = bc_right

    def fit(self, X=None, y=None):
        spec = BvpSpec.from_peclet(self.pe)
        scheme = choose_scheme(self.pe, 1.0 / self.n_cells) if self.scheme == "auto" else self.scheme
        self.grid_ = solve_fd(spec, (0.0, 1.0), self.n_cells, self.bc_left, self.bc_right, scheme)
        self.scheme_ = scheme
        return self

    def predict(self, X):
        check_is_fitted(self, "grid_")
        return interpolate(self.grid_, check_points(X))


class PINNRegressor(RegressorMixin, BaseEstimator):
    """Single-domain PINN.

    ``X`` holds the collocation points.  If ``y`` is given it is used as
    snapshot data at those points and switches on the data loss.
    """

    def __init__(self, pe=10.0, dbc_mode="SDBC", alpha_r=0.25, n_epochs=1024,
                 layer_sizes=(1, 20, 20, 1), mu=1.0, k=1.0, learning_rate=1e-3,
                 linear_output=False, random_state=0):
        self.pe = pe
        self.dbc_mode = dbc_mode
        self.alpha_r = alpha_r
        self.n_epochs = n_epochs
        self.layer_sizes = layer_sizes
        self.mu = mu
        self.k = k
        self.learning_rate = learning_rate
        self.linear_output = linear_output
        self.random_state = random_state

    def fit(self, X, y=None):
        x = check_points(X)
        snapshot = None if y is None else Snapshot(x, check_targets(y, x.size))
        mode = DbcMode.parse(self.dbc_mode)
        self.pinn_ = SubdomainPinn(
            params=init_params(self.layer_sizes, self.random_state),
            mode=mode,
            interval=(0.0, 1.0),
            points=x,
            weights=LossWeights.for_mode(mode, self.alpha_r, snapshot is not None),
            k=self.k,
            mu=self.mu,
            snapshot=snapshot,
            linear_output=self.linear_output,
        )
        self.loss_history_ = train_epochs(
            self.pinn_, BvpSpec.from_peclet(self.pe), self.n_epochs, Adam(lr=self.learning_rate)
        )
        self.n_iter_ = self.n_epochs
        return self

    def predict(self, X):
        check_is_fitted(self, "pinn_")
        return np.asarray(transform_solution(self.pinn_, check_points(X)), dtype=float)


class SchwarzSolver(RegressorMixin, BaseEstimator):
    """Overlapping Schwarz coupling of PINN and/or FOM subdomains.

    ``solvers`` is ``"pinn"``, ``"fom"`` or one entry per subdomain.
    ``fit`` ignores ``X`` and ``y``; after fitting, ``status_``, ``n_iter_``
    and ``result_`` describe the run.
    """

    def __init__(self, pe=10.0, n_d=2, p_o=0.2, solvers="pinn", dbc_mode="WDBC",
                 use_data_loss=False, alpha_r=0.25, epochs_per_iter=1024, max_iters=100,
                 delta_schwarz=1e-3, tol_l2=5e-3, n_collocation=1024,
                 layer_sizes=(1, 20, 20, 1), random_state=0):
        self.pe = pe
        self.n_d = n_d
        self.p_o = p_o
        self.solvers = solvers
        self.dbc_mode = dbc_mode
        self.use_data_loss = use_data_loss
        self.alpha_r = alpha_r
        self.epochs_per_iter = epochs_per_iter
        self.max_iters = max_iters
        self.delta_schwarz = delta_schwarz
        self.tol_l2 = tol_l2
        self.n_collocation = n_collocation
        self.layer_sizes = layer_sizes
        self.random_state = random_state

    def to_config(self) -> SchwarzConfig:
        solvers = [self.solvers] if isinstance(self.solvers, str) else list(self.solvers)
        return SchwarzConfig(
            pe=float(self.pe), n_d=int(self.n_d), p_o=float(self.p_o), solvers=solvers,
            dbc_mode=self.dbc_mode, use_data_loss=bool(self.use_data_loss),
            alpha_r=float(self.alpha_r), epochs_per_iter=int(self.epochs_per_iter),
            max_iters=int(self.max_iters), delta_schwarz=float(self.delta_schwarz),
            tol_l2=float(self.tol_l2), n_collocation=int(self.n_collocation),
            layer_sizes=list(self.layer_sizes), seed=int(self.random_state),
        )

    def fit(self, X=None, y=None):
        self.result_ = run(self.to_config())
        self.status_ = self.result_.status
        self.n_iter_ = self.result_.iterations
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        return self.result_.evaluate(check_points(X))

