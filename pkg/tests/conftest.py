import pytest

from zcl.synth import SyntheticWorkloadSpec, generate_synthetic_trace


@pytest.fixture(scope="session")
def zipf08_million():
    """~1e6 requests over a 100k-object universe, exponent 0.8, all cacheable."""
    spec = SyntheticWorkloadSpec(
        universe_size=100_000,
        zipf_alpha=0.8,
        clients=20,
        per_client_rate=50_000.0,
        horizon_days=1.0,
        seed=42,
    )
    return generate_synthetic_trace(spec)
