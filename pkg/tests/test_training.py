import math

import numpy as np
import pytest

from patchcs import imaging, models, training
from patchcs.errors import ConfigurationError, NumericalError, UsageError
from patchcs.sensing import SensingConfig, gen_measurement_matrix


def images(seed=0, shapes=((40, 48), (36, 36))):
    rng = np.random.default_rng(seed)
    out = []
    for h, w in shapes:
        yy, xx = np.mgrid[:h, :w]
        out.append(np.clip(0.5 + 0.3 * np.sin(xx / 5 + seed) * np.cos(yy / 7) + 0.05 * rng.normal(size=(h, w)), 0, 1))
    return out


def identity_recon(n, seed=0):
    """λ=1 reconstruction net whose FC is φᵀ and whose residual branch is zero: an exact patch inverse."""
    phi = gen_measurement_matrix(SensingConfig(n, 1.0, seed=seed))
    net = models.Network.zeros(models.build_descriptor("fc1-resconv", n, 1.0), phi)
    net.params["fc.weight"][:] = phi.phi.T
    return net, phi


def random_init(kind, n, rate, seed=0, std=None):
    d = models.build_descriptor(kind, n, rate)
    spec = models.default_init_spec(d, seed)
    if std is not None:
        spec = models.InitSpec({s: std for s in d.stage_names()}, seed)
    return models.init_weights(d, spec)


class TestDatasets:
    def test_single_256_image(self):
        phi = gen_measurement_matrix(SensingConfig(32, 0.25, seed=1))
        ds = training.build_recon_dataset([np.zeros((256, 256))], phi)
        assert len(ds) == 289
        assert ds.inputs.shape == (289, 256)

    @pytest.mark.parametrize("rate,m", [(0.25, 256), (0.10, 102), (0.04, 40), (0.01, 10)])
    def test_input_length(self, rate, m):
        phi = gen_measurement_matrix(SensingConfig(32, rate, seed=1))
        assert training.build_recon_dataset([np.zeros((32, 46))], phi).inputs.shape == (2, m)

    def test_inputs_are_measurements(self):
        phi = gen_measurement_matrix(SensingConfig(8, 0.25, seed=2))
        ds = training.build_recon_dataset(images(), phi, stride=5)
        recomputed = ds.targets.reshape(len(ds), -1) @ phi.phi.T
        np.testing.assert_allclose(ds.inputs, recomputed, rtol=0, atol=1e-13)
        assert ds.provenance == "reconstruction" and ds.rate == 0.25

    def test_small_image_skipped_with_warning(self, caplog):
        phi = gen_measurement_matrix(SensingConfig(8, 0.25, seed=2))
        with caplog.at_level("WARNING"):
            ds = training.build_recon_dataset([np.zeros((5, 30)), np.zeros((8, 8))], phi, stride=4)
        assert len(ds) == 1
        assert "smaller" in caplog.text

    def test_deterministic_order(self):
        phi = gen_measurement_matrix(SensingConfig(8, 0.25, seed=2))
        a = training.build_recon_dataset(images(), phi, stride=3)
        b = training.build_recon_dataset(images(), phi, stride=3)
        assert a.inputs.tobytes() == b.inputs.tobytes()
        np.testing.assert_array_equal(a.targets[1], images()[0][0:8, 3:11])

    def test_blocky_identity_degenerate(self):
        net, phi = identity_recon(8)
        imgs = images(shapes=((40, 40), (24, 32)))
        ds = training.build_blocky_dataset(imgs, net, phi, stride=6)
        assert ds.provenance == "deblock"
        np.testing.assert_allclose(ds.inputs, ds.targets, rtol=0, atol=1e-12)

    def test_blocky_non_multiple_sizes(self):
        net, phi = identity_recon(8)
        ds = training.build_blocky_dataset(images(shapes=((21, 30),)), net, phi, stride=6)
        assert len(ds) == 3 * 4
        np.testing.assert_allclose(ds.inputs, ds.targets, atol=1e-12)

    def test_blocky_mismatch(self):
        net, phi = identity_recon(8)
        other = gen_measurement_matrix(SensingConfig(8, 1.0, seed=99))
        with pytest.raises(ConfigurationError):
            training.build_blocky_dataset(images(), net, other)
        with pytest.raises(ConfigurationError):
            training.build_blocky_dataset(images(), net, gen_measurement_matrix(SensingConfig(8, 0.5)))
        deb = models.Network.zeros(models.build_descriptor("deblock-resconv", 8))
        with pytest.raises(ConfigurationError):
            training.build_blocky_dataset(images(), deb, phi)

    def test_blocky_inputs_straddle_blocks(self):
        # only offsets 0 and 224 are multiples of 32 on a 256-pixel axis
        offsets = [14 * i for i in range((256 - 32) // 14 + 1)]
        aligned = [o for o in offsets if o % 32 == 0]
        assert aligned == [0, 224]
        assert len(offsets) ** 2 - len(aligned) ** 2 == 285

    def test_pair_dataset(self):
        clean = images()
        ds = training.build_pair_dataset(clean, clean, size=8, stride=5)
        assert ds.provenance == "jpeg-deblock"
        np.testing.assert_array_equal(ds.inputs, ds.targets)
        expected = sum(((h - 8) // 5 + 1) * ((w - 8) // 5 + 1) for h, w in ((40, 48), (36, 36)))
        assert len(ds) == expected
        phi = gen_measurement_matrix(SensingConfig(8, 0.5, seed=1))
        assert len(training.build_recon_dataset(clean, phi, stride=5)) == expected

    def test_pair_shape_mismatch(self):
        with pytest.raises(UsageError):
            training.build_pair_dataset([np.zeros((10, 10))], [np.zeros((10, 11))], size=4)
        with pytest.raises(UsageError):
            training.build_pair_dataset([np.zeros((10, 10))], [], size=4)

    def test_invariants(self):
        with pytest.raises(ConfigurationError):
            training.PatchDataset(np.zeros((2, 4)), np.zeros((3, 2, 2)), "reconstruction", 2)
        with pytest.raises(ConfigurationError):
            training.PatchDataset(np.zeros((2, 4)), np.zeros((2, 2, 2)), "deblock", 2)
        with pytest.raises(ConfigurationError):
            training.PatchDataset(np.zeros((2, 2, 2)), np.zeros((2, 2, 2)), "noise", 2)

    def test_save_load(self, tmp_path):
        phi = gen_measurement_matrix(SensingConfig(8, 0.25, seed=2))
        ds = training.build_recon_dataset(images(), phi, stride=7)
        ds.save(tmp_path / "d.npz")
        back = training.PatchDataset.load(tmp_path / "d.npz")
        assert back.inputs.tobytes() == ds.inputs.tobytes()
        assert (back.provenance, back.patch_size, back.rate) == ("reconstruction", 8, 0.25)


class TestSchedule:
    def test_defaults(self):
        r = training.TrainSchedule.for_reconstruction()
        assert r.lrs == {"fc": 1e-5, "early": 1e-5, "last": 1e-6}
        assert (r.momentum, r.batch_size, r.epochs) == (0.9, 128, 200)
        assert training.TrainSchedule.for_deblock().lrs == {"early": 1e-3, "last": 1e-4}

    @pytest.mark.parametrize(
        "kw", [{"batch_size": 0}, {"momentum": 1.0}, {"momentum": -0.1}, {"lrs": {"early": 0.0}}]
    )
    def test_invalid(self, kw):
        args = {"lrs": {"early": 1e-3}} | kw
        with pytest.raises(ConfigurationError):
            training.TrainSchedule(**args)

    def test_missing_group(self):
        net = random_init("deblock-resconv", 8, None)
        ds = training.build_pair_dataset(images(), images(1), size=8, stride=8)
        with pytest.raises(ConfigurationError):
            training.train(net, ds, training.TrainSchedule({"early": 1e-3}, epochs=1))

    def test_provenance_mismatch(self):
        net = random_init("deblock-resconv", 8, None)
        phi = gen_measurement_matrix(SensingConfig(8, 0.25, seed=2))
        ds = training.build_recon_dataset(images(), phi)
        with pytest.raises(ConfigurationError):
            training.train(net, ds, training.TrainSchedule.for_deblock(epochs=1))


class TestValidate:
    def test_perfect_network_is_inf(self):
        net, phi = identity_recon(8)
        ds = training.build_recon_dataset(images(), phi, stride=8)
        assert training.validate(net, ds) == math.inf

    def test_zero_deblock_scores_input_psnr(self):
        ds = training.build_pair_dataset(images(1), images(2), size=8, stride=7)
        net = models.Network.zeros(models.build_descriptor("deblock-resconv", 8))
        expected = np.mean([imaging.psnr(a, b) for a, b in zip(ds.inputs, ds.targets)])
        assert training.validate(net, ds) == expected

    def test_matches_offline_recompute(self):
        ds = training.build_pair_dataset(images(1), images(2), size=8, stride=7)
        net = random_init("deblock-resconv", 8, None, std=0.05)
        preds = [models.forward(net, x) for x in ds.inputs]
        offline = []
        for p, t in zip(preds, ds.targets):
            a = np.clip(np.floor(p * 255 + 0.5), 0, 255)
            b = np.clip(np.floor(t * 255 + 0.5), 0, 255)
            offline.append(10 * math.log10(255**2 / np.mean((a - b) ** 2)))
        assert abs(training.validate(net, ds) - np.mean(offline)) < 1e-9

    def test_empty(self):
        net = random_init("deblock-resconv", 8, None)
        empty = training.PatchDataset(np.zeros((0, 8, 8)), np.zeros((0, 8, 8)), "deblock", 8)
        with pytest.raises(UsageError):
            training.validate(net, empty)


def toy_recon(n_samples=50, seed=0):
    phi = gen_measurement_matrix(SensingConfig(8, 0.25, seed=seed))
    ds = training.build_recon_dataset(images(seed, ((64, 64),)), phi, stride=4)
    return phi, ds.subset(np.arange(n_samples))


class TestTrain:
    def test_lr_to_zero_is_noop(self):
        phi, ds = toy_recon(1)
        net = random_init("fc1-resconv", 8, 0.25, seed=1)
        sched = training.TrainSchedule({"fc": 1e-300, "early": 1e-300, "last": 1e-300}, epochs=1)
        best, log = training.train(net, ds, sched, ds)
        assert log.records[-1].val_psnr == pytest.approx(log.records[0].val_psnr, abs=1e-12)
        for k in net.params:
            np.testing.assert_allclose(best.params[k], net.params[k], rtol=0, atol=1e-250)

    def test_smoke_loss_decreases(self):
        phi, ds = toy_recon(50)
        net = random_init("fc1-resconv", 8, 0.25, seed=1)
        sched = training.TrainSchedule({"fc": 1e-2, "early": 1e-3, "last": 1e-4}, batch_size=10, epochs=40, seed=3)
        _, log = training.train(net, ds, sched)
        steps = [r.loss for r in log.records]
        assert len(steps) == 40 and 40 * 5 == 200
        improvements, best = 0, math.inf
        for loss in steps:
            if loss < best:
                improvements += best != math.inf
                best = loss
        assert improvements >= 5
        assert steps[-1] < steps[0]

    def test_best_checkpoint(self):
        phi, ds = toy_recon(50)
        net = random_init("fc1-resconv", 8, 0.25, seed=1)
        sched = training.TrainSchedule({"fc": 1e-2, "early": 1e-3, "last": 1e-4}, batch_size=10, epochs=5)
        best, log = training.train(net, ds, sched, ds)
        vals = [r.val_psnr for r in log.records]
        assert [r.epoch for r in log.records] == list(range(6))
        assert training.validate(best, ds) == max(vals) == best.metadata["best_val_psnr"]

    def test_nan_aborts(self):
        phi, ds = toy_recon(20)
        ds.inputs[13, 0] = np.nan
        net = random_init("fc1-resconv", 8, 0.25)
        with pytest.raises(NumericalError) as e:
            training.train(net, ds, training.TrainSchedule.for_reconstruction(epochs=1, batch_size=4, seed=0))
        order = np.random.default_rng(0).permutation(20)
        assert e.value.batch_index == int(np.where(order == 13)[0][0]) // 4
        assert e.value.epoch == 1

    def test_bit_reproducible(self):
        phi, ds = toy_recon(30)
        net = random_init("fc1-resconv", 8, 0.25)
        sched = training.TrainSchedule({"fc": 1e-2, "early": 1e-3, "last": 1e-4}, batch_size=8, epochs=2, chunk_size=3)
        a, _ = training.train(net, ds, sched)
        b, _ = training.train(net, ds, sched)
        assert all(a.params[k].tobytes() == b.params[k].tobytes() for k in a.params)

    def test_thread_count_independent(self):
        phi, ds = toy_recon(30)
        net = random_init("fc1-resconv", 8, 0.25)
        kw = dict(lrs={"fc": 1e-2, "early": 1e-3, "last": 1e-4}, batch_size=16, epochs=2, chunk_size=4)
        a, _ = training.train(net, ds, training.TrainSchedule(threads=1, **kw))
        b, _ = training.train(net, ds, training.TrainSchedule(threads=3, **kw))
        assert all(a.params[k].tobytes() == b.params[k].tobytes() for k in a.params)

    def test_input_network_untouched(self):
        phi, ds = toy_recon(10)
        net = random_init("fc1-resconv", 8, 0.25)
        before = {k: v.copy() for k, v in net.params.items()}
        training.train(net, ds, training.TrainSchedule.for_reconstruction(epochs=1))
        assert all(np.array_equal(before[k], net.params[k]) for k in before)

    def test_log_csv(self, tmp_path):
        phi, ds = toy_recon(10)
        net = random_init("fc1-resconv", 8, 0.25)
        _, log = training.train(net, ds, training.TrainSchedule.for_reconstruction(epochs=2), ds)
        log.to_csv(tmp_path / "log.csv")
        lines = (tmp_path / "log.csv").read_text().splitlines()
        assert lines[0] == "epoch,loss,val_psnr,seconds"
        assert [line.split(",")[0] for line in lines[1:]] == ["0", "1", "2"]

    def test_log_monotone(self):
        log = training.TrainLog()
        log.append(training.TrainRecord(2, 0.0, 0.0, 0.0))
        with pytest.raises(ValueError):
            log.append(training.TrainRecord(1, 0.0, 0.0, 0.0))
