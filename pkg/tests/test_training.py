"""Optimizer math, config parsing, batch sourcing, the three stage loops and
the single-image overfit probe.

Resume equivalence is asserted at the strongest level available: the final
checkpoint of an interrupted-and-resumed run must be byte-identical to the
uninterrupted run's.
"""

import json
import math

import numpy as np
import pytest
import torch

from tirfill.checkpoint import load_checkpoint
from tirfill.data_pipeline import generate_stroke_mask, load_manifest, mask_ratio, MaskBucket
from tirfill.errors import ConfigurationError, TrainingError, ValidationError
from tirfill.pipeline import InpaintPipeline
from tirfill.training import (
    Adam,
    ArrayDataset,
    BatchSource,
    ManifestDataset,
    TrainConfig,
    _ConstantBatch,
    adam_step,
    build_extractor,
    load_train_config,
    make_fixed_batch,
    overfit_single_image,
    parse_kv_file,
    train_completion_stage,
    train_edge_stage,
    train_refinement_stage,
)
from util import smooth_image, tiny_train_config


def _fixed_mask(size=64, seed=0):
    rng = np.random.default_rng(seed)
    return generate_stroke_mask(rng, MaskBucket(0.2, 0.3), size)


def _dataset():
    return ArrayDataset([smooth_image(64, seed=3)], augment=False)


class TestTrainConfig:
    def test_defaults(self):
        config = TrainConfig()
        assert config.lr_edge == 1e-3
        assert config.lr_completion == 1e-4
        assert config.lr_refinement == 1e-4
        assert config.adam_beta1 == 0.5
        assert config.adam_beta2 == 0.9
        assert config.adam_eps == 1e-8
        assert config.batch_size == 8
        assert config.train_size == 256

    def test_validation(self):
        with pytest.raises(ValidationError):
            TrainConfig(lr_edge=0.0)
        with pytest.raises(ValidationError):
            TrainConfig(adam_beta1=1.0)
        with pytest.raises(ValidationError):
            TrainConfig(batch_size=0)
        with pytest.raises(ValidationError):
            TrainConfig(steps_edge=-1)
        with pytest.raises(ConfigurationError):
            TrainConfig(feature_extractor="vgg")

    def test_network_config_mapping(self):
        config = TrainConfig(base_width=16, train_size=128, eag_enabled=False)
        net = config.network_config()
        assert net.base_width == 16
        assert net.input_size == 128
        assert net.eag_enabled is False

    def test_header_dict_strips_location(self):
        config = TrainConfig(checkpoint_dir="/somewhere/else")
        header = config.header_dict()
        assert "checkpoint_dir" not in header
        assert header["seed"] == 0

    def test_from_mapping_coercion(self):
        config = TrainConfig.from_mapping(
            {"lr_edge": "5e-4", "batch_size": "2", "eag_enabled": "off",
             "joint_finetune": "true", "feature_extractor": "none"}
        )
        assert config.lr_edge == 5e-4
        assert config.batch_size == 2
        assert config.eag_enabled is False
        assert config.joint_finetune is True

    def test_from_mapping_rejects_unknown_key(self):
        with pytest.raises(ConfigurationError):
            TrainConfig.from_mapping({"learning_rate": "1e-3"})

    def test_from_mapping_rejects_bad_values(self):
        with pytest.raises(ConfigurationError):
            TrainConfig.from_mapping({"batch_size": "two"})
        with pytest.raises(ConfigurationError):
            TrainConfig.from_mapping({"eag_enabled": "maybe"})

    def test_kv_file_parsing(self, tmp_path):
        path = tmp_path / "train.cfg"
        path.write_text(
            "# comment line\n"
            "lr_edge = 2e-3   # trailing comment\n"
            "\n"
            "batch_size=4\n",
            encoding="utf-8",
        )
        assert parse_kv_file(path) == {"lr_edge": "2e-3", "batch_size": "4"}
        config = load_train_config(path)
        assert config.lr_edge == 2e-3
        assert config.batch_size == 4

    def test_kv_file_rejects_bare_token(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("lr_edge\n", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            parse_kv_file(path)


class TestAdamStep:
    def test_first_step_oracle(self):
        param = torch.zeros((), dtype=torch.float64)
        grad = torch.ones((), dtype=torch.float64)
        m = torch.zeros((), dtype=torch.float64)
        v = torch.zeros((), dtype=torch.float64)
        new_p, new_m, new_v = adam_step(param, grad, m, v, step=1, lr=0.1)
        assert abs(float(new_m) - 0.5) < 1e-12
        assert abs(float(new_v) - 0.1) < 1e-8
        assert abs(float(new_p) - (-0.1 / (1.0 + 1e-8))) < 1e-9

    def test_first_step_moves_by_lr_regardless_of_scale(self):
        for scale in (1e-3, 1.0, 1e3):
            param = torch.zeros(())
            grad = torch.full((), scale)
            new_p, _, _ = adam_step(param, grad, torch.zeros(()), torch.zeros(()),
                                    step=1, lr=0.01)
            assert abs(float(new_p) + 0.01) < 1e-6

    def test_two_steps_match_hand_derivation(self):
        lr, b1, b2, eps = 0.01, 0.5, 0.9, 1e-8
        p = torch.zeros((), dtype=torch.float64)
        m = torch.zeros((), dtype=torch.float64)
        v = torch.zeros((), dtype=torch.float64)
        grads = [1.0, -2.0]
        for step, g in enumerate(grads, start=1):
            p, m, v = adam_step(p, torch.tensor(g, dtype=torch.float64), m, v,
                                step=step, lr=lr, beta1=b1, beta2=b2, eps=eps)

        em = ev = ep = 0.0
        for step, g in enumerate(grads, start=1):
            em = b1 * em + (1 - b1) * g
            ev = b2 * ev + (1 - b2) * g * g
            m_hat = em / (1 - b1**step)
            v_hat = ev / (1 - b2**step)
            ep = ep - lr * m_hat / (math.sqrt(v_hat) + eps)
        assert abs(float(p) - ep) < 1e-14

    def test_rejects_step_zero(self):
        z = torch.zeros(())
        with pytest.raises(ValidationError):
            adam_step(z, z, z, z, step=0, lr=0.1)

    def test_non_finite_gradient_names_parameter(self):
        z = torch.zeros(())
        bad = torch.tensor(float("nan"))
        with pytest.raises(TrainingError, match="completion.decoder.weight"):
            adam_step(z, bad, z, z, step=1, lr=0.1, name="completion.decoder.weight")

    def test_inputs_not_mutated(self):
        param = torch.ones(3)
        grad = torch.full((3,), 2.0)
        m = torch.zeros(3)
        v = torch.zeros(3)
        adam_step(param, grad, m, v, step=1, lr=0.1)
        assert torch.equal(param, torch.ones(3))
        assert torch.equal(m, torch.zeros(3))
        assert torch.equal(v, torch.zeros(3))


class TestAdamOptimizer:
    def _problem(self, seed=0):
        gen = torch.Generator().manual_seed(seed)
        w = torch.randn(4, 3, generator=gen, dtype=torch.float64, requires_grad=True)
        target = torch.randn(4, 3, generator=gen, dtype=torch.float64)
        return w, target

    def test_matches_torch_adam(self):
        w_ours, target = self._problem()
        w_ref = w_ours.detach().clone().requires_grad_(True)
        ours = Adam({"w": w_ours}, lr=0.05, beta1=0.5, beta2=0.9, eps=1e-8)
        ref = torch.optim.Adam([w_ref], lr=0.05, betas=(0.5, 0.9), eps=1e-8)
        for _ in range(5):
            ours.zero_grad()
            ((w_ours - target) ** 2).sum().backward()
            ours.step()
            ref.zero_grad()
            ((w_ref - target) ** 2).sum().backward()
            ref.step()
        torch.testing.assert_close(w_ours, w_ref, rtol=1e-10, atol=1e-10)

    def test_skips_params_without_grad(self):
        w = torch.ones(2, requires_grad=True)
        opt = Adam({"w": w}, lr=0.1)
        opt.step()
        assert opt.step_count == 1
        assert torch.equal(w.detach(), torch.ones(2))

    def test_state_roundtrip_continues_identically(self):
        w_a, target = self._problem(1)
        opt_a = Adam({"w": w_a}, lr=0.05)

        def one_step(w, opt):
            opt.zero_grad()
            ((w - target) ** 2).sum().backward()
            opt.step()

        for _ in range(3):
            one_step(w_a, opt_a)
        saved = opt_a.state_arrays("optim/g")
        w_b = w_a.detach().clone().requires_grad_(True)
        opt_b = Adam({"w": w_b}, lr=0.05)
        opt_b.load_state_arrays("optim/g", saved)
        assert opt_b.step_count == 3
        for _ in range(2):
            one_step(w_a, opt_a)
            one_step(w_b, opt_b)
        torch.testing.assert_close(w_a, w_b, rtol=0, atol=0)

    def test_missing_state_rejected(self):
        opt = Adam({"w": torch.ones(1, requires_grad=True)}, lr=0.1)
        with pytest.raises(ValidationError):
            opt.load_state_arrays("optim/g", {})


class TestDatasets:
    def test_array_dataset_validation(self):
        with pytest.raises(ValidationError):
            ArrayDataset([])
        img = smooth_image(64)
        with pytest.raises(ValidationError):
            ArrayDataset([img], masks=[])
        with pytest.raises(ValidationError):
            ArrayDataset([img], masks=[np.ones((32, 32), dtype=np.float32)])

    def test_augmented_sample_shape(self):
        data = ArrayDataset([smooth_image(96, seed=1)], augment=True)
        rng = np.random.default_rng(0)
        image, mask = data.sample(rng, 64)
        assert image.shape == (64, 64)
        assert mask is None

    def test_non_augmented_requires_exact_size(self):
        data = ArrayDataset([smooth_image(96, seed=1)], augment=False)
        with pytest.raises(ValidationError):
            data.sample(np.random.default_rng(0), 64)

    def test_fixed_masks_passed_through(self):
        img = smooth_image(64, seed=2)
        mask = _fixed_mask(64, seed=2)
        data = ArrayDataset([img], masks=[mask], augment=False)
        _, got = data.sample(np.random.default_rng(0), 64)
        np.testing.assert_array_equal(got, mask)

    def test_manifest_dataset(self, fixture_dataset):
        manifest = load_manifest(fixture_dataset["manifest"])
        data = ManifestDataset(manifest, augment=True)
        image, mask = data.sample(np.random.default_rng(0), 64)
        assert image.shape == (64, 64)
        assert mask is None
        assert float(image.min()) >= 0.0 and float(image.max()) <= 1.0


class TestBatchSource:
    def test_batch_contract(self):
        config = tiny_train_config("unused", batch_size=2)
        source = BatchSource(_dataset(), config)
        batch = source.next_batch()
        assert set(batch) == {"image_gt", "mask", "image_in", "edge_gt", "edge_in"}
        for key, tensor in batch.items():
            assert tensor.shape == (2, 1, 64, 64), key
            assert tensor.dtype == torch.float32
        torch.testing.assert_close(
            batch["image_in"], batch["image_gt"] * batch["mask"], rtol=0, atol=0
        )
        masked_edges = batch["edge_in"] * batch["mask"]
        torch.testing.assert_close(batch["edge_in"], masked_edges, rtol=0, atol=0)

    def test_same_seed_same_stream(self):
        config = tiny_train_config("unused", batch_size=1)
        a = BatchSource(_dataset(), config)
        b = BatchSource(_dataset(), config)
        for _ in range(3):
            batch_a = a.next_batch()
            batch_b = b.next_batch()
            for key in batch_a:
                assert torch.equal(batch_a[key], batch_b[key])

    def test_state_restore_replays_stream(self):
        config = tiny_train_config("unused", batch_size=1)
        source = BatchSource(_dataset(), config)
        for _ in range(3):
            source.next_batch()
        state = source.state()
        expected = [source.next_batch() for _ in range(2)]
        fresh = BatchSource(_dataset(), config)
        fresh.load_state(state)
        for want in expected:
            got = fresh.next_batch()
            for key in want:
                assert torch.equal(want[key], got[key])

    def test_mask_ratios_in_table_range(self):
        config = tiny_train_config("unused", batch_size=1)
        source = BatchSource(_dataset(), config)
        for _ in range(20):
            batch = source.next_batch()
            ratio = mask_ratio(batch["mask"][0, 0].numpy())
            assert 0.01 <= ratio <= 0.60

    def test_unmasked_input_edges(self):
        config = tiny_train_config("unused", batch_size=1, mask_input_edges=False)
        source = BatchSource(_dataset(), config)
        batch = source.next_batch()
        assert batch["edge_in"].shape == (1, 1, 64, 64)


class TestBuildExtractor:
    def test_none_requires_zero_weights(self):
        config = tiny_train_config("unused")
        assert build_extractor(config) is None
        with pytest.raises(ConfigurationError):
            build_extractor(
                tiny_train_config("unused", feature_extractor="none", w_perc=1.0)
            )

    def test_random_extractor_seeded(self):
        config = tiny_train_config(
            "unused", feature_extractor="random", extractor_seed=3,
            w_perc=1.0, w_style=1.0,
        )
        a = build_extractor(config)
        b = build_extractor(config)
        x = torch.rand(1, 1, 16, 16, generator=torch.Generator().manual_seed(0))
        torch.testing.assert_close(a(x, (2,))[2], b(x, (2,))[2], rtol=0, atol=0)


def _stage_arrays(path, prefix):
    _, arrays = load_checkpoint(path)
    return {k: v for k, v in arrays.items() if k.startswith(prefix)}


class TestEdgeStage:
    def test_zero_steps_preserves_initialization(self, tmp_path):
        from tirfill.checkpoint import bundle_arrays
        from tirfill.networks import build_models

        config = tiny_train_config(tmp_path, steps_edge=0)
        final = train_edge_stage(config, _dataset())
        assert final.name == "edge_final.ckpt"
        header, arrays = load_checkpoint(final)
        assert header["step"] == 0
        fresh = bundle_arrays(build_models(config.network_config(), config.seed))
        model_keys = {k for k in arrays if k.startswith("model/")}
        assert model_keys == set(fresh)
        for key in fresh:
            np.testing.assert_array_equal(arrays[key], fresh[key])

    def test_loss_log_lines(self, tmp_path):
        config = tiny_train_config(tmp_path, steps_edge=3)
        train_edge_stage(config, _dataset())
        lines = (tmp_path / "losses.ndjson").read_text().splitlines()
        assert len(lines) == 3
        for i, line in enumerate(lines, start=1):
            record = json.loads(line)
            assert record["stage"] == "edge"
            assert record["step"] == i
            assert {"d", "adversarial", "g_total"} <= set(record["losses"])
            assert all(math.isfinite(v) for v in record["losses"].values())

    def test_edge_l1_descends_on_constant_batch(self, tmp_path):
        config = tiny_train_config(tmp_path, steps_edge=40, edge_l1_weight=1.0)
        batch = make_fixed_batch(smooth_image(64, seed=3), _fixed_mask(), config)
        train_edge_stage(config, _ConstantBatch(batch))
        records = [json.loads(l) for l in (tmp_path / "losses.ndjson").read_text().splitlines()]
        first = np.mean([r["losses"]["edge_l1"] for r in records[:5]])
        last = np.mean([r["losses"]["edge_l1"] for r in records[-5:]])
        assert last < first

    def test_periodic_checkpoints_written(self, tmp_path):
        config = tiny_train_config(tmp_path, steps_edge=4, checkpoint_every=2)
        train_edge_stage(config, _dataset())
        assert (tmp_path / "edge_000002.ckpt").is_file()
        assert not (tmp_path / "edge_000004.ckpt").is_file()
        assert (tmp_path / "edge_final.ckpt").is_file()

    def test_deterministic_across_directories(self, tmp_path):
        config_a = tiny_train_config(tmp_path / "a", steps_edge=3)
        config_b = tiny_train_config(tmp_path / "b", steps_edge=3)
        final_a = train_edge_stage(config_a, _dataset())
        final_b = train_edge_stage(config_b, _dataset())
        assert final_a.read_bytes() == final_b.read_bytes()
        log_a = (tmp_path / "a" / "losses.ndjson").read_text()
        log_b = (tmp_path / "b" / "losses.ndjson").read_text()
        assert log_a == log_b

    def test_resume_matches_uninterrupted_run(self, tmp_path):
        config_a = tiny_train_config(tmp_path / "a", steps_edge=4, checkpoint_every=2)
        final_a = train_edge_stage(config_a, _dataset())
        config_b = tiny_train_config(tmp_path / "b", steps_edge=4, checkpoint_every=2)
        final_b = train_edge_stage(
            config_b, _dataset(), resume_from=tmp_path / "a" / "edge_000002.ckpt"
        )
        assert final_a.read_bytes() == final_b.read_bytes()

    def test_resume_rejects_wrong_stage(self, tmp_path, tiny_checkpoints):
        config = tiny_train_config(tmp_path, steps_edge=2)
        with pytest.raises(ValidationError):
            train_edge_stage(config, _dataset(), resume_from=tiny_checkpoints["completion"])


class TestCompletionStage:
    def test_descends_on_constant_batch(self, tmp_path, tiny_checkpoints):
        config = tiny_train_config(tmp_path, steps_completion=25, lr_completion=1e-3)
        batch = make_fixed_batch(smooth_image(64, seed=3), _fixed_mask(), config)
        train_completion_stage(config, _ConstantBatch(batch), tiny_checkpoints["edge"])
        records = [json.loads(l) for l in (tmp_path / "losses.ndjson").read_text().splitlines()]
        assert records[-1]["losses"]["total"] < records[0]["losses"]["total"]

    def test_edge_generator_frozen(self, tmp_path, tiny_checkpoints):
        config = tiny_train_config(tmp_path, steps_completion=3)
        final = train_completion_stage(config, _dataset(), tiny_checkpoints["edge"])
        upstream = _stage_arrays(tiny_checkpoints["edge"], "model/edge_generator/")
        downstream = _stage_arrays(final, "model/edge_generator/")
        assert set(upstream) == set(downstream)
        for key in upstream:
            np.testing.assert_array_equal(upstream[key], downstream[key])

    def test_completion_parameters_change(self, tmp_path, tiny_checkpoints):
        config = tiny_train_config(tmp_path, steps_completion=3)
        final = train_completion_stage(config, _dataset(), tiny_checkpoints["edge"])
        before = _stage_arrays(tiny_checkpoints["edge"], "model/completion/")
        after = _stage_arrays(final, "model/completion/")
        changed = any(not np.array_equal(before[k], after[k]) for k in before)
        assert changed

    def test_resume_matches_uninterrupted_run(self, tmp_path, tiny_checkpoints):
        config_a = tiny_train_config(tmp_path / "a", steps_completion=4, checkpoint_every=2)
        final_a = train_completion_stage(config_a, _dataset(), tiny_checkpoints["edge"])
        config_b = tiny_train_config(tmp_path / "b", steps_completion=4, checkpoint_every=2)
        final_b = train_completion_stage(
            config_b, _dataset(), tiny_checkpoints["edge"],
            resume_from=tmp_path / "a" / "completion_000002.ckpt",
        )
        assert final_a.read_bytes() == final_b.read_bytes()

    def test_rejects_wrong_upstream_stage(self, tmp_path, tiny_checkpoints):
        config = tiny_train_config(tmp_path, steps_completion=1)
        with pytest.raises(ValidationError):
            train_completion_stage(config, _dataset(), tiny_checkpoints["completion"])

    def test_divergence_raises_training_error(self, tmp_path, tiny_checkpoints):
        config = tiny_train_config(tmp_path, steps_completion=2)
        batch = make_fixed_batch(smooth_image(64, seed=3), _fixed_mask(), config)
        batch["image_gt"] = batch["image_gt"] * float("nan")
        with pytest.raises(TrainingError, match="completion stage diverged at step 1"):
            train_completion_stage(config, _ConstantBatch(batch), tiny_checkpoints["edge"])

    def test_divergence_names_last_good_checkpoint(self, tmp_path, tiny_checkpoints):
        config = tiny_train_config(tmp_path, steps_completion=4, checkpoint_every=1)
        good = make_fixed_batch(smooth_image(64, seed=3), _fixed_mask(), config)
        bad = {k: v.clone() for k, v in good.items()}
        bad["image_gt"] = bad["image_gt"] * float("nan")

        class FlakySource:
            def __init__(self):
                self.calls = 0

            def next_batch(self):
                self.calls += 1
                return good if self.calls <= 2 else bad

            def state(self):
                return {}

            def load_state(self, state):
                pass

        with pytest.raises(TrainingError, match="completion_000002.ckpt"):
            train_completion_stage(config, FlakySource(), tiny_checkpoints["edge"])


class TestRefinementStage:
    def test_descends_on_constant_batch(self, tmp_path, tiny_checkpoints):
        config = tiny_train_config(
            tmp_path, steps_refinement=25, lr_refinement=1e-3, w_adv=0.05
        )
        batch = make_fixed_batch(smooth_image(64, seed=3), _fixed_mask(), config)
        train_refinement_stage(
            config, _ConstantBatch(batch), tiny_checkpoints["edge"], tiny_checkpoints["completion"]
        )
        records = [json.loads(l) for l in (tmp_path / "losses.ndjson").read_text().splitlines()]
        assert records[-1]["losses"]["l1"] < records[0]["losses"]["l1"]

    def test_upstream_frozen_without_joint_finetune(self, tmp_path, tiny_checkpoints):
        config = tiny_train_config(tmp_path, steps_refinement=3)
        final = train_refinement_stage(
            config, _dataset(), tiny_checkpoints["edge"], tiny_checkpoints["completion"]
        )
        for prefix in ("model/edge_generator/", "model/completion/"):
            upstream = _stage_arrays(tiny_checkpoints["completion"], prefix)
            downstream = _stage_arrays(final, prefix)
            for key in upstream:
                np.testing.assert_array_equal(upstream[key], downstream[key], err_msg=key)

    def test_joint_finetune_updates_completion(self, tmp_path, tiny_checkpoints):
        config = tiny_train_config(tmp_path, steps_refinement=3, joint_finetune=True)
        final = train_refinement_stage(
            config, _dataset(), tiny_checkpoints["edge"], tiny_checkpoints["completion"]
        )
        before = _stage_arrays(tiny_checkpoints["completion"], "model/completion/")
        after = _stage_arrays(final, "model/completion/")
        assert any(not np.array_equal(before[k], after[k]) for k in before)
        edge_before = _stage_arrays(tiny_checkpoints["completion"], "model/edge_generator/")
        edge_after = _stage_arrays(final, "model/edge_generator/")
        for key in edge_before:
            np.testing.assert_array_equal(edge_before[key], edge_after[key])

    def test_resume_matches_uninterrupted_run(self, tmp_path, tiny_checkpoints):
        config_a = tiny_train_config(tmp_path / "a", steps_refinement=4, checkpoint_every=2)
        final_a = train_refinement_stage(
            config_a, _dataset(), tiny_checkpoints["edge"], tiny_checkpoints["completion"]
        )
        config_b = tiny_train_config(tmp_path / "b", steps_refinement=4, checkpoint_every=2)
        final_b = train_refinement_stage(
            config_b, _dataset(), tiny_checkpoints["edge"], tiny_checkpoints["completion"],
            resume_from=tmp_path / "a" / "refinement_000002.ckpt",
        )
        assert final_a.read_bytes() == final_b.read_bytes()

    def test_missing_edge_checkpoint(self, tmp_path, tiny_checkpoints):
        config = tiny_train_config(tmp_path, steps_refinement=1)
        with pytest.raises(ValidationError):
            train_refinement_stage(
                config, _dataset(), tmp_path / "missing.ckpt", tiny_checkpoints["completion"]
            )

    def test_rejects_wrong_upstream_stage(self, tmp_path, tiny_checkpoints):
        config = tiny_train_config(tmp_path, steps_refinement=1)
        with pytest.raises(ValidationError):
            train_refinement_stage(
                config, _dataset(), tiny_checkpoints["edge"], tiny_checkpoints["edge"]
            )


class TestInpaintPipeline:
    def test_valid_pixels_bit_exact(self, tiny_checkpoints):
        pipe = InpaintPipeline.from_checkpoint(tiny_checkpoints["refinement"])
        image = smooth_image(64, seed=5)
        mask = _fixed_mask(64, seed=5)
        out = pipe.inpaint(image, mask)
        assert out.result.shape == image.shape
        assert out.result.dtype == np.float32
        np.testing.assert_array_equal(out.result[mask == 1.0], image[mask == 1.0])
        assert float(out.result.min()) >= 0.0 and float(out.result.max()) <= 1.0

    def test_all_valid_mask_is_identity(self, tiny_checkpoints):
        pipe = InpaintPipeline.from_checkpoint(tiny_checkpoints["refinement"])
        image = smooth_image(64, seed=6)
        out = pipe.inpaint(image, np.ones_like(image))
        np.testing.assert_array_equal(out.result, image)

    def test_timings_reported(self, tiny_checkpoints):
        pipe = InpaintPipeline.from_checkpoint(tiny_checkpoints["refinement"])
        out = pipe.inpaint(smooth_image(64, seed=7), _fixed_mask(64, seed=7))
        assert set(out.timings_ms) == {"edge_ms", "completion_ms", "refinement_ms"}
        assert all(v > 0.0 for v in out.timings_ms.values())

    def test_non_multiple_of_four_padded(self, tiny_checkpoints):
        pipe = InpaintPipeline.from_checkpoint(tiny_checkpoints["refinement"])
        image = smooth_image(64, seed=8)[:66 - 64 + 64, :][:62, :61]
        rng = np.random.default_rng(8)
        mask = (rng.random(image.shape) > 0.25).astype(np.float32)
        out = pipe.inpaint(image, mask)
        assert out.padded
        assert out.result.shape == image.shape
        np.testing.assert_array_equal(out.result[mask == 1.0], image[mask == 1.0])

    def test_debug_outputs(self, tiny_checkpoints):
        pipe = InpaintPipeline.from_checkpoint(tiny_checkpoints["refinement"])
        image = smooth_image(64, seed=9)
        mask = _fixed_mask(64, seed=9)
        plain = pipe.inpaint(image, mask)
        assert plain.edge is None and plain.coarse is None and plain.raw is None
        debug = pipe.inpaint(image, mask, return_debug=True)
        assert debug.edge.shape == image.shape
        assert debug.coarse.shape == image.shape
        assert set(np.unique(debug.edge)) <= {0.0, 1.0}
        assert debug.raw.shape == image.shape
        assert debug.raw.min() >= 0.0 and debug.raw.max() <= 1.0
        hole = mask == 0.0
        np.testing.assert_array_equal(debug.raw[hole], debug.result[hole])

    def test_deterministic_repeats(self, tiny_checkpoints):
        pipe = InpaintPipeline.from_checkpoint(tiny_checkpoints["refinement"])
        image = smooth_image(64, seed=10)
        mask = _fixed_mask(64, seed=10)
        a = pipe.inpaint(image, mask)
        b = pipe.inpaint(image, mask)
        np.testing.assert_array_equal(a.result, b.result)

    def test_input_validation(self, tiny_checkpoints):
        pipe = InpaintPipeline.from_checkpoint(tiny_checkpoints["refinement"])
        image = smooth_image(64, seed=11)
        with pytest.raises(ValidationError):
            pipe.inpaint(image, np.ones((32, 32), dtype=np.float32))
        with pytest.raises(ValidationError):
            pipe.inpaint(image, np.full_like(image, 0.5))
        with pytest.raises(ValidationError):
            pipe.inpaint(np.zeros((2, 2), dtype=np.float32), np.ones((2, 2), dtype=np.float32))

    def test_checkpoint_metadata(self, tiny_checkpoints):
        from tirfill.checkpoint import checkpoint_id

        pipe = InpaintPipeline.from_checkpoint(tiny_checkpoints["refinement"])
        assert pipe.checkpoint_sha256 == checkpoint_id(tiny_checkpoints["refinement"])
        summary = pipe.config_summary()
        assert summary["stage"] == "refinement"
        assert summary["base_width"] == 8
        assert summary["canny_low"] == 80.0


class TestOverfitProbe:
    def test_zero_steps_returns_masked_input_baseline(self):
        config = tiny_train_config(
            "unused", steps_edge=0, steps_completion=0, steps_refinement=0
        )
        image = smooth_image(64, seed=12)
        mask = _fixed_mask(64, seed=12)
        got = overfit_single_image(config, image, mask)
        hole = mask == 0.0
        mse = float(np.mean(image[hole].astype(np.float64) ** 2))
        expected = min(100.0, 10.0 * math.log10(1.0 / mse))
        assert abs(got - expected) < 1e-9

    def test_rejects_hole_free_mask(self):
        config = tiny_train_config("unused", steps_edge=0, steps_completion=0,
                                   steps_refinement=0)
        image = smooth_image(64, seed=13)
        with pytest.raises(ValidationError):
            overfit_single_image(config, image, np.ones_like(image))

    def test_end_to_end_probe_runs(self, tmp_path):
        config = tiny_train_config(tmp_path)
        psnr = overfit_single_image(config, smooth_image(64, seed=14))
        assert math.isfinite(psnr)
        assert psnr > 0.0
        assert (tmp_path / "refinement_final.ckpt").is_file()
