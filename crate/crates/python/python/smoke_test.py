"""Quick end-to-end check of the pydarboux extension."""

import math

import pydarboux as pd


def main():
    one = pd.apply(pd.SpectralMeasure.atom(1.0, 2.0), nodes=1)
    assert abs(one.potential(0.0) + 2.0) < 1e-13
    assert one.admissible

    sigma = pd.SpectralMeasure.atoms([(1.0, 1.0), (1.5, 1.0)])
    two = pd.apply(sigma, nodes=1)
    for x in (-3.0, 0.0, 2.5):
        q = two.potential(x, 0.2)
        assert abs(q - pd.nsoliton([1.0, 1.5], [1.0, 1.0], x, 0.2)) < 1e-11
        assert abs(q - two.potential(x, 0.2, method="logdet")) < 1e-11

    back = pd.invert(two)
    assert max(abs(v) for v in back.potential_grid([-2.0, 0.0, 2.0])) < 1e-12

    gas = pd.apply(pd.SpectralMeasure.semicircle(), nodes=128, scheme="sine")
    q_gas = gas.potential(0.0)
    q_ref = pd.reflectionless_step(0.0, nodes=128)
    assert abs(q_gas - q_ref) < 1e-6, (q_gas, q_ref)

    psi = one.jost(0.5, 0.0, complex(0.3, 0.2))
    assert isinstance(psi, complex) and math.isfinite(psi.real)

    m = pd.SpectralMeasure(sigma.to_json())
    assert m == sigma and abs(m.total_mass() - 2.0) < 1e-15

    try:
        pd.apply(pd.SpectralMeasure.atom(1.0, -2.0), nodes=1)
    except ValueError:
        pass
    else:
        raise AssertionError("removal without force accepted")

    forced = pd.apply(pd.SpectralMeasure.atom(1.0, -2.0), nodes=1, force=True)
    try:
        forced.potential(0.0)
    except pd.SingularSystemError:
        pass
    else:
        raise AssertionError("crossing not reported")

    print("pydarboux smoke test passed")


if __name__ == "__main__":
    main()
