import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from schwarz_pinn import FiniteDifferenceSolver, PINNRegressor, SchwarzSolver
from schwarz_pinn.problem import BvpSpec, analytic_solution
from schwarz_pinn.schwarz import Status


def test_get_params_and_clone():
    est = SchwarzSolver(pe=100.0, n_d=3, solvers="fom")
    params = est.get_params()
    assert params["pe"] == 100.0 and params["n_d"] == 3 and params["solvers"] == "fom"
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    est.set_params(p_o=0.3)
    assert est.p_o == 0.3
    assert clone(PINNRegressor(dbc_mode="MDBC")).dbc_mode == "MDBC"


def test_finite_difference_solver():
    est = FiniteDifferenceSolver(pe=10.0, n_cells=256).fit()
    assert est.scheme_ == "central"
    x = np.linspace(0, 1, 33)
    spec = BvpSpec.from_peclet(10)
    assert np.max(np.abs(est.predict(x) - analytic_solution(spec, x))) < 1e-3
    assert est.predict(x.reshape(-1, 1)).shape == (33,)
    assert FiniteDifferenceSolver(pe=1e6).fit().scheme_ == "upwind2"
    assert est.score(x.reshape(-1, 1), analytic_solution(spec, x)) > 0.999


def test_predict_before_fit():
    with pytest.raises(NotFittedError):
        FiniteDifferenceSolver().predict([0.5])
    with pytest.raises(NotFittedError):
        SchwarzSolver().predict([0.5])


@pytest.mark.parametrize("bad", [[[0.1, 0.2]], [1.5], [np.nan], []])
def test_input_validation(bad):
    est = FiniteDifferenceSolver(n_cells=16).fit()
    with pytest.raises(ValueError):
        est.predict(np.array(bad, dtype=float))


def test_schwarz_solver_fom():
    est = SchwarzSolver(pe=10.0, n_d=2, p_o=0.2, solvers="fom").fit()
    assert est.status_ is Status.CONVERGED and est.n_iter_ <= 30
    x = np.linspace(0, 1, 101)
    assert np.max(np.abs(est.predict(x) - analytic_solution(BvpSpec.from_peclet(10), x))) < 1e-3
    cfg = est.to_config()
    assert cfg.solvers == ["fom"] and cfg.seed == 0


def test_pinn_regressor_fit_predict():
    x = np.linspace(0, 1, 66)[1:-1]
    est = PINNRegressor(pe=10.0, n_epochs=50, layer_sizes=(1, 8, 1))
    est.fit(x)
    assert est.n_iter_ == 50 and len(est.loss_history_) == 50
    assert est.loss_history_[-1].total < est.loss_history_[0].total
    pred = est.predict([0.0, 1.0])
    # SDBC holds the Dirichlet data by construction
    assert np.allclose(pred, 0.0, atol=1e-12)


def test_pinn_regressor_with_targets():
    x = np.linspace(0, 1, 34)[1:-1]
    y = analytic_solution(BvpSpec.from_peclet(10), x)
    est = PINNRegressor(n_epochs=5, layer_sizes=(1, 4, 1)).fit(x, y)
    assert est.pinn_.weights.alpha_d == pytest.approx(0.75)
    with pytest.raises(ValueError):
        PINNRegressor(n_epochs=1).fit(x, y[:-1])
