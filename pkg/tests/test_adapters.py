import json

import numpy as np
import pytest

from fairmoo.adapters import (
    AdaptedDenoiser,
    AdapterError,
    AdapterSpec,
    attach_adapter,
    combined_forward,
    load_adapter,
    merge_adapter,
    save_adapter,
)
from fairmoo.diffusion_toy import Denoiser, DenoiserConfig, fd_region_gradients, make_batch, make_schedule, \
    objective_bundle, synth_dataset
from fairmoo.numerics import max_rel_error

CFG = DenoiserConfig((1, 8, 8), (16, 12))


@pytest.fixture
def base():
    return Denoiser.create(CFG, 0)


def trained(model, rng, scale=0.3):
    theta = model.trainable()
    return model.with_trainable(theta.with_data(scale * rng.standard_normal(theta.size)))


def inputs(rng, n=100):
    return rng.uniform(-1, 1, (n, CFG.in_dim))


def test_fresh_adapter_is_bit_exact(base, rng):
    model, params, _ = attach_adapter(base, AdapterSpec(rank=4), 1)
    x = inputs(rng)
    assert np.array_equal(model.predict(x), base.predict(x))
    for layer in params.spec.targets:
        assert not params.delta(layer).any()


def test_zero_beta_reproduces_base(base, rng):
    model, _, _ = attach_adapter(base, AdapterSpec(rank=4), 1)
    model = trained(model, rng)
    x = inputs(rng)
    assert np.array_equal(AdaptedDenoiser(model.base, model.adapter, 0.0).predict(x), base.predict(x))


def test_partition_is_disjoint_and_complete(base):
    _, _, part = attach_adapter(base, AdapterSpec(rank=2), 1)
    assert not set(part.frozen) & set(part.trainable)
    assert set(part.frozen) | set(part.trainable) == set(part.all_names)
    assert set(part.frozen) == set(base.params)


def test_rank_bound_enforced(base):
    with pytest.raises(AdapterError):
        attach_adapter(base, AdapterSpec(rank=13), 1)  # fc2 has min(fan_in, fan_out) = 12
    with pytest.raises(AdapterError):
        attach_adapter(base, AdapterSpec(rank=0), 1)
    with pytest.raises(AdapterError):
        attach_adapter(base, AdapterSpec(rank=2, targets=("fc9",)), 1)


def test_known_extra_weight(base, rng):
    model, params, _ = attach_adapter(base, AdapterSpec(rank=3, beta=1.0, targets=("fc1",)), 1)
    model = trained(model, rng)
    extra = model.adapter.delta("fc1")
    manual = dict(base.params)
    manual["fc1.W"] = manual["fc1.W"] + extra
    x = inputs(rng)
    assert np.max(np.abs(model.predict(x) - Denoiser(CFG, manual).predict(x))) <= 1e-12


def test_linear_in_beta_for_output_layer(base, rng):
    model, _, _ = attach_adapter(base, AdapterSpec(rank=3, targets=("out",)), 1)
    model = trained(model, rng)
    x = inputs(rng)
    outs = [combined_forward(base, model.adapter, b, x) for b in (0.0, 1.0, 2.0)]
    assert np.allclose(outs[2] - outs[1], outs[1] - outs[0], rtol=0, atol=1e-12)


def test_merge_matches_runtime(base, rng):
    model, _, _ = attach_adapter(base, AdapterSpec(rank=4), 1)
    model = trained(model, rng)
    x = inputs(rng)
    merged = merge_adapter(base, model.adapter, model.beta)
    assert np.max(np.abs(merged.predict(x) - model.predict(x))) <= 1e-12
    for k, v in merge_adapter(base, model.adapter, 0.0).params.items():
        assert np.array_equal(v, base.params[k])
    back = merge_adapter(merge_adapter(base, model.adapter, 0.4), model.adapter, -0.4)
    for k, v in back.params.items():
        assert np.max(np.abs(v - base.params[k])) <= 1e-10


def test_non_finite_output_raises(base, rng):
    model, _, _ = attach_adapter(base, AdapterSpec(rank=2), 1)
    theta = model.trainable()
    model = model.with_trainable(theta.with_data(np.full(theta.size, 1e200)))
    with pytest.raises(FloatingPointError), np.errstate(all="ignore"):
        model.predict(inputs(rng, 2))


def test_adapter_gradients_only_for_trainable_set(base, rng):
    model, _, _ = attach_adapter(base, AdapterSpec(rank=2), 1)
    model = trained(model, rng)
    data = synth_dataset(2, 3, 8)
    batch = make_batch(data.z0, rng.standard_normal(data.z0.shape), [3, 70], make_schedule(100, 1e-4, 0.02),
                       data.face, data.hand, data.cond)
    bundle = objective_bundle(batch, model)
    assert bundle.dim == model.trainable().size
    numeric = fd_region_gradients(model, batch)
    for i in range(3):
        assert max_rel_error(bundle.grads[i], numeric[i]) <= 1e-5


def test_checkpoint_round_trip(tmp_path, base, rng):
    model, _, _ = attach_adapter(base, AdapterSpec(rank=3, beta=0.3, targets=("fc1", "out")), 42)
    model = trained(model, rng)
    save_adapter(tmp_path, model.adapter)
    meta = json.loads((tmp_path / "adapter.json").read_text())
    assert meta == {"rank": 3, "beta": 0.3, "targets": ["fc1", "out"], "seed": 42}
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == sorted(["adapter.json"] + [f"{l}.{m}.{e}" for l in ("fc1", "out") for m in "AB"
                                               for e in ("f64", "json")])
    loaded = load_adapter(tmp_path)
    assert loaded.spec == model.adapter.spec
    x = inputs(rng)
    assert np.array_equal(AdaptedDenoiser(base, loaded).predict(x), model.predict(x))
