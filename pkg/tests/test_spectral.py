import json
import math

import mpmath
import numpy as np
import pytest
from scipy.special import polygamma, psi, zeta

from bszeta import data_path
from bszeta.fuchsian import LengthSpectrum
from bszeta.spectral import (TRIVIAL, OutOfRange, SpectralData, counting_function, h_s_eval,
                             hkp_bound_check, hurwitz_sum, identity_residual, load_eigenvalues,
                             paired_harmonic, phi_map, save_eigenvalues, spectral_ds, spectral_ds2)
from bszeta.zetageom import log_deriv

VOL = 4 * math.pi
BASE = SpectralData([0.0], VOL)


def test_phi_map():
    assert phi_map(TRIVIAL) == 0.0
    assert phi_map(0) == 0.25
    assert phi_map(0.5j) == pytest.approx(0.0)
    assert phi_map(2.0) == pytest.approx(4.25)
    assert phi_map(0.3j) == pytest.approx(0.25 - 0.09)
    for bad in (0.7j, 1 + 1j, -1.0, "sign"):
        with pytest.raises(OutOfRange):
            phi_map(bad)


def test_h_s_eval():
    assert h_s_eval(1.0, 0.25) == 1.0
    assert h_s_eval(1.0, 0.0) == pytest.approx(64 / 27)
    assert 64 / 27 == pytest.approx(2.370370, abs=1e-6)
    with pytest.raises(ValueError):
        h_s_eval(0.5, 1.0)


def test_hurwitz_sum():
    assert hurwitz_sum(2, 1) == pytest.approx(math.pi ** 2 / 6, rel=1e-14)
    assert hurwitz_sum(3, 1) == pytest.approx(1.2020569031595942, rel=1e-14)
    assert hurwitz_sum(2, 2) == pytest.approx(math.pi ** 2 / 6 - 1, rel=1e-14)
    for a in (0.3, 1.7, 2.5, 40.0):
        assert hurwitz_sum(2, a) == pytest.approx(zeta(2, a), rel=1e-13)
        assert hurwitz_sum(3, a) == pytest.approx(zeta(3, a), rel=1e-13)
        assert hurwitz_sum(2, a) == pytest.approx(polygamma(1, a), rel=1e-13)


def test_paired_harmonic():
    for a1, a2 in ((1.5, 3.5), (2.0, 2.25), (3.5, 1.5)):
        assert paired_harmonic(a1, a2) == pytest.approx(psi(a2) - psi(a1), rel=1e-13)


def test_spectral_ds2_single_eigenvalue_value():
    s = 2.0
    expect = 32 * (15 / 4) ** -3 - 4 * (0.25 * zeta(2, 2.5) + zeta(3, 2.5))
    assert spectral_ds2(BASE, s).value == pytest.approx(expect, rel=1e-13)


@pytest.mark.parametrize("s", [0.8, 1.5, 2.0, 3.0])
def test_spectral_ds2_is_ds_of_spectral_ds(s):
    data = SpectralData([0.0, 3.8, 5.35, 5.35, 8.25], VOL)

    def q(x):
        return spectral_ds(data, x).value / x

    h = 1e-4
    fd = -(8 * (q(s + h) - q(s - h)) - (q(s + 2 * h) - q(s - 2 * h))) / (12 * h)
    assert spectral_ds2(data, s).value == pytest.approx(fd, rel=1e-8)


def test_spectral_ds_matches_mpmath():
    data = SpectralData([0.0, 2.0, 7.0], VOL)
    s = 1.7
    eig = 4 * s * sum((s * s + lam - 0.25) ** -2 for lam in data.lambdas)
    ident = VOL / math.pi * float(mpmath.zeta(2, s + 0.5))
    assert spectral_ds(data, s).value == pytest.approx(eig - ident, rel=1e-13)


def test_spectral_rejects_small_s():
    with pytest.raises(ValueError):
        spectral_ds(BASE, 0.5)


def test_spectral_data_validation():
    with pytest.raises(ValueError):
        SpectralData([0.5, 1.0], VOL)
    with pytest.raises(ValueError):
        SpectralData([0.0, 2.0, 1.0], VOL)
    with pytest.raises(ValueError):
        SpectralData([0.0], 0.0)
    with pytest.raises(ValueError):
        SpectralData([0.0, 1.0], VOL, lambda_err=[0.0])
    d = SpectralData([0.0, 1.0], VOL, lambda_err=[0.0, 0.01])
    assert d.err.tolist() == [0.0, 0.01]
    assert SpectralData([0.0, 1.0], VOL, lambda_err=0.1).err.tolist() == [0.1, 0.1]


def test_identity_degenerate_pair(spec6):
    r = identity_residual(spec6, BASE, 1.5, 1.5)
    assert r.residual == 0.0 and r.ok


def test_identity_empty_spectrum_closed_form():
    # no geometric terms: residual = (vol/pi)(psi(b+1/2) - psi(s+1/2)) - 2 [1/(s^2 - 1/4) - 1/(b^2 - 1/4)]
    empty = LengthSpectrum(10.0, [], 2.0, True)
    data = SpectralData([0.0], 2.0)
    s, b = 1.5, 3.0
    r = identity_residual(empty, data, s, b)
    expect = 2.0 / math.pi * (psi(b + 0.5) - psi(s + 0.5)) - 2 * (1 / (s * s - 0.25) - 1 / (b * b - 0.25))
    assert r.residual == pytest.approx(expect, rel=1e-13)
    assert r.geometric_budget == math.inf and not r.ok


def test_identity_lhs_uses_shifted_log_derivative(spec10):
    d = load_eigenvalues(str(data_path("bolza_eigenvalues.json")))
    r = identity_residual(spec10, d, 1.5, 3.0)
    assert r.lhs == pytest.approx(log_deriv(spec10, 2.0) / 1.5, rel=1e-14)


def test_counting_function():
    d = SpectralData([0.0, 1.0, 1.0, 2.5], VOL)
    assert counting_function(d, 0) == 0
    assert counting_function(d, 1e-12) == 1
    assert counting_function(d, 1.0) == 1
    assert counting_function(d, 1.0 + 1e-12) == 3
    with pytest.raises(ValueError):
        counting_function(d, -1)


def test_hkp_trivial_and_violation():
    ok, _ = hkp_bound_check(BASE, C=1.0, T_min=1 / VOL)
    assert ok
    crowded = SpectralData([0.0] + [2.0] * 200, VOL)
    ok, T = hkp_bound_check(crowded, C=0.5)
    assert not ok and T == 2.0


def test_shipped_eigenvalues():
    d = load_eigenvalues(str(data_path("bolza_eigenvalues.json")))
    assert d.vol == pytest.approx(VOL)
    assert len(d.lambdas) > 100 and d.lambda_max > 100
    assert d.source
    # first nonzero eigenvalue of the Bolza surface, literature value 3.8388872588
    assert d.lambdas[1] == pytest.approx(3.8388872588, abs=max(1e-5, 3 * d.err[1]))
    assert d.lambdas[2] == pytest.approx(d.lambdas[1], abs=1e-5)
    assert d.lambdas[3] == pytest.approx(d.lambdas[1], abs=1e-5)
    assert d.lambdas[4] == pytest.approx(5.3536, abs=1e-3)
    assert hkp_bound_check(d, C=1.0)[0]


def test_eigenvalue_roundtrip(tmp_path):
    d = SpectralData([0.0, 1.5, 2.5], VOL, "test", [0.0, 1e-6, 2e-6], {"method": {"order": 2}})
    save_eigenvalues(d, tmp_path / "e.json")
    back = load_eigenvalues(tmp_path / "e.json")
    assert back == d
    obj = json.loads((tmp_path / "e.json").read_text())
    assert obj["lambda_err"] == [0.0, 1e-6, 2e-6]
    (tmp_path / "bad.json").write_text('{"lambdas": [0.0]}')
    with pytest.raises(ValueError, match="vol"):
        load_eigenvalues(tmp_path / "bad.json")


def test_data_error_enters_budget(spec10):
    lam = [0.0, 3.84, 5.35, 8.25]
    exact = SpectralData(lam, VOL)
    fuzzy = SpectralData(lam, VOL, lambda_err=0.01)
    a = identity_residual(spec10, exact, 1.5, 3.0)
    b = identity_residual(spec10, fuzzy, 1.5, 3.0)
    assert b.spectral_budget > a.spectral_budget
    q = lambda x: x * x + np.array(lam) - 0.25
    extra = 2 * 0.01 * np.sum(np.abs(1 / q(1.5) ** 2 - 1 / q(3.0) ** 2))
    assert b.spectral_budget - a.spectral_budget == pytest.approx(extra, rel=1e-12)
