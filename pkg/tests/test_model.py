import struct

import pytest
import torch

from spdseq import ArchitectureMismatch, SpdSequenceModel
from spdseq.geometry import chol_dim
from spdseq.model import check_same_architecture, param_count

from conftest import random_spd_batch


def make_model(dim=3, n_classes=2, n_layers=1, scales=(0.25, 0.75), seed=0):
    model = SpdSequenceModel(dim, n_classes, n_layers=n_layers, scales=scales)
    model.reset_parameters(generator=torch.Generator().manual_seed(seed))
    return model


class TestForward:
    def test_logit_shape(self, rng):
        model = make_model(n_classes=4)
        x = random_spd_batch(3 * 6, 3, rng).reshape(3, 6, 3, 3)
        assert model(x).shape == (3, 4)

    def test_output_sequence_spd(self, rng):
        model = make_model(n_layers=2)
        x = random_spd_batch(2 * 5, 3, rng).reshape(2, 5, 3, 3)
        out = model.output_sequence(x)
        assert out.shape == (2, 5, 3, 3)
        _, info = torch.linalg.cholesky_ex(out.reshape(-1, 3, 3))
        assert int(info.max()) == 0

    def test_three_layer_stack_end_to_end(self, rng):
        model = make_model(n_layers=3)
        x = random_spd_batch(2 * 4, 3, rng).reshape(2, 4, 3, 3)
        logits = model(x)
        assert logits.shape == (2, 2)
        assert torch.isfinite(logits).all()

    def test_zero_readout_gives_zero_logits(self, rng):
        model = make_model()
        with torch.no_grad():
            model.readout.weight.zero_()
            model.readout.bias.zero_()
        x = random_spd_batch(1 * 3, 3, rng).reshape(1, 3, 3, 3)
        assert torch.equal(model(x), torch.zeros(1, 2, dtype=torch.float64))

    def test_readout_row_permutation_permutes_logits(self, rng):
        model = make_model(n_classes=3)
        x = random_spd_batch(2 * 3, 3, rng).reshape(2, 3, 3, 3)
        base = model(x)
        perm = torch.tensor([2, 0, 1])
        with torch.no_grad():
            model.readout.weight.copy_(model.readout.weight[perm])
            model.readout.bias.copy_(model.readout.bias[perm])
        assert torch.allclose(model(x), base[:, perm])

    def test_rejects_bad_arch_args(self):
        with pytest.raises(ValueError):
            SpdSequenceModel(3, 2, n_layers=0)
        with pytest.raises(ValueError):
            SpdSequenceModel(3, 1)


class TestParamCount:
    def test_formula(self):
        model = make_model(dim=3, n_classes=2, n_layers=2, scales=(0.1, 0.5, 0.9))
        k, n = 3, 3
        expected = 2 * (2 * k + 2 + 3 * (n * (n - 1) // 2)) + 2 * (n * (n + 1) // 2 + 1)
        assert model.param_count() == expected

    def test_matches_torch_parameter_count(self):
        model = make_model(dim=4, n_classes=3, n_layers=2)
        assert model.param_count() == sum(p.numel() for p in model.parameters())

    def test_checkpoint_size_matches_count(self, tmp_path):
        model = make_model(dim=3, n_classes=3, n_layers=2, scales=(0.2, 0.8))
        path = tmp_path / "model.bin"
        model.save(path)
        header = 8 + 20 + 8 * len(model.scales) + 8
        assert path.stat().st_size == header + 8 * model.param_count()

    def test_recurrent_only_counts(self):
        # 2|J| + 2 + 3 n(n-1)/2 per layer, hand-evaluated cases
        five = SpdSequenceModel(3, 2, scales=(0.01, 0.25, 0.5, 0.9, 0.99))
        assert param_count(five, include_readout=False) == 21
        one_d = SpdSequenceModel(1, 2, scales=(0.5,))
        assert param_count(one_d, include_readout=False) == 4

    def test_monotone_in_scales_and_dim(self):
        small = SpdSequenceModel(2, 2, scales=(0.5,))
        more_scales = SpdSequenceModel(2, 2, scales=(0.25, 0.75))
        bigger_dim = SpdSequenceModel(3, 2, scales=(0.5,))
        assert param_count(more_scales) > param_count(small)
        assert param_count(bigger_dim) > param_count(small)

    def test_exclude_readout(self):
        model = make_model(dim=3, n_classes=2, scales=(0.2, 0.8))
        diff = param_count(model) - param_count(model, include_readout=False)
        assert diff == 2 * (chol_dim(3) + 1)


class TestCheckpoint:
    def test_roundtrip_bitexact(self, rng, tmp_path):
        model = make_model(dim=3, n_classes=3, n_layers=2, seed=11)
        path = tmp_path / "model.bin"
        model.save(path)
        loaded = SpdSequenceModel.load(path)
        for (na, pa), (nb, pb) in zip(model.named_parameters(), loaded.named_parameters()):
            assert na == nb
            assert torch.equal(pa, pb), na
        x = random_spd_batch(2 * 4, 3, rng).reshape(2, 4, 3, 3)
        assert torch.equal(model(x), loaded(x))

    def test_roundtrip_preserves_architecture(self, tmp_path):
        model = make_model(dim=2, n_classes=5, n_layers=3, scales=(0.1, 0.4, 0.7))
        path = tmp_path / "model.bin"
        model.save(path)
        loaded = SpdSequenceModel.load(path)
        assert loaded.dim == 2 and loaded.n_classes == 5
        assert len(loaded.layers) == 3
        assert loaded.scales == (0.1, 0.4, 0.7)
        check_same_architecture(model, loaded)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bogus.bin"
        path.write_bytes(b"NOTAMODEL" + b"\x00" * 64)
        with pytest.raises(ValueError, match="magic"):
            SpdSequenceModel.load(path)

    def test_bad_version_rejected(self, tmp_path):
        model = make_model()
        path = tmp_path / "model.bin"
        model.save(path)
        raw = bytearray(path.read_bytes())
        raw[8:12] = struct.pack("<I", 99)
        path.write_bytes(bytes(raw))
        with pytest.raises(ValueError, match="version"):
            SpdSequenceModel.load(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        model = make_model()
        path = tmp_path / "model.bin"
        model.save(path)
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(ValueError, match="trailing"):
            SpdSequenceModel.load(path)

    def test_little_endian_f64_layout(self, tmp_path):
        model = make_model(dim=2, n_classes=2, scales=(0.25, 0.75))
        path = tmp_path / "model.bin"
        model.save(path)
        raw = path.read_bytes()
        assert raw[:8] == b"SPDRNN1\x00"
        version, dim, n_scales, n_layers, n_classes = struct.unpack("<5I", raw[8:28])
        assert (version, dim, n_scales, n_layers, n_classes) == (1, 2, 2, 1, 2)
        scales = struct.unpack("<2d", raw[28:44])
        assert scales == (0.25, 0.75)
        # first per-layer block is sqrt_wy
        offset = 44 + 8
        wy = struct.unpack("<2d", raw[offset:offset + 16])
        assert torch.allclose(torch.tensor(wy, dtype=torch.float64), model.layers[0].sqrt_wy)


class TestArchitectureCheck:
    def test_mismatch_raises(self):
        a = make_model(dim=3, n_classes=2)
        b = make_model(dim=3, n_classes=3)
        with pytest.raises(ArchitectureMismatch):
            check_same_architecture(a, b)

    def test_scale_mismatch_raises(self):
        a = make_model(scales=(0.25, 0.75))
        b = make_model(scales=(0.2, 0.75))
        with pytest.raises(ArchitectureMismatch):
            check_same_architecture(a, b)
