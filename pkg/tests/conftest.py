import numpy as np
import pytest

from spectail.bundle import LayerMatrix, WeightBundle


def random_bundle(seed: int, n_layers: int = 3, with_init: bool = True) -> WeightBundle:
    rng = np.random.default_rng(seed)
    layers = []
    for depth in range(n_layers):
        m = int(rng.integers(2, 9))
        n = int(rng.integers(2, 9))
        layers.append(
            LayerMatrix(
                name=f"layer{depth}",
                values=rng.standard_normal((m, n)),
                init_values=rng.standard_normal((m, n)) if with_init else None,
                depth_index=depth,
            )
        )
    return WeightBundle(
        model_id=f"test-{seed}",
        layers=layers,
        metadata={"seed": str(seed), "note": "generated"},
    )


def shaped_bundle(shapes, model_id="shaped") -> WeightBundle:
    """Bundle with the given (rows, cols) per layer and tiny deterministic values."""
    rng = np.random.default_rng(0)
    layers = [
        LayerMatrix(name=f"net.{i}", values=rng.standard_normal(shape) * 0.01, depth_index=i)
        for i, shape in enumerate(shapes)
    ]
    return WeightBundle(model_id=model_id, layers=layers)


@pytest.fixture
def mlp_shapes():
    return [(784, 512), (512, 256), (256, 128), (128, 10)]
