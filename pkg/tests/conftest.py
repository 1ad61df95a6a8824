import numpy as np
import pytest

from thermoch import galerkin as gk
from thermoch import spectral as sp


@pytest.fixture
def unit_domain():
    return sp.BoxDomain((1.0,), 64)


@pytest.fixture
def unit_basis(unit_domain):
    return sp.build_basis(unit_domain, 16)


def make_problem_data(
    domain,
    potential,
    eps=0.1,
    gamma=1.0,
    a=0.0,
    b=1.0,
    kappa1=1.0,
    kappa2=1.0,
    lam=2.0,
    f=None,
    g=None,
    phi0=None,
    w0=None,
    w1=None,
    t_final=1.0,
):
    zero = gk.constant_source(sp.constant_field(0.0, domain))
    const = lambda v: sp.constant_field(v, domain)
    return gk.ProblemData(
        params=gk.PhysicalParams(gamma, a, b, kappa1, kappa2, lam),
        potential=potential,
        eps=eps,
        f=f if f is not None else zero,
        g=g if g is not None else zero,
        phi0=phi0 if phi0 is not None else const(0.0),
        w0=w0 if w0 is not None else const(0.0),
        w1=w1 if w1 is not None else const(0.0),
        t_final=t_final,
    )


def coeffs_allclose(a, b, tol=1e-12):
    return np.allclose(a.values, b.values, rtol=0.0, atol=tol)
