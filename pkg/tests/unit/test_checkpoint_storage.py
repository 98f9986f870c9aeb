# tests/unit/test_checkpoint_storage.py
import json
import struct

import numpy as np
import pytest

from src.core.model.model import VisionEncoderDecoder
from src.data.images import ImageTensor
from src.storage.checkpoint_storage import (
    FORMAT_VERSION,
    MAGIC,
    Checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from src.utils.errors import (
    CheckpointShapeError,
    CheckpointVersionError,
    StorageError,
    TruncatedCheckpointError,
)
from tests.helpers import micro_config


def _rewrite_header(data: bytes, mutate) -> bytes:
    """Decode the JSON header, let mutate() edit it, and splice it back."""
    (header_len,) = struct.unpack("<I", data[12:16])
    header = json.loads(data[16:16 + header_len].decode("utf-8"))
    mutate(header)
    encoded = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return data[:12] + struct.pack("<I", len(encoded)) + encoded + data[16 + header_len:]


@pytest.fixture
def checkpoint(small_tokenizer):
    model = VisionEncoderDecoder(micro_config(vocab=small_tokenizer.vocab_size), seed=3)
    return Checkpoint.from_model(model, small_tokenizer, training_step=17, metadata={"seed": 3})


class TestRoundTrip:
    @pytest.mark.parametrize("dtype", ["float32", "float64"])
    def test_reloaded_model_is_bitwise_identical(self, tmp_path, small_tokenizer, dtype):
        model = VisionEncoderDecoder(micro_config(dtype=dtype, vocab=small_tokenizer.vocab_size), seed=5)
        path = save_checkpoint(Checkpoint.from_model(model, small_tokenizer), tmp_path / "model.ckpt")
        restored = load_checkpoint(path).build_model()
        image = ImageTensor(np.random.default_rng(0).random((1, 8, 16)))
        tokens = np.array([[1, 5, 6, 7]])
        np.testing.assert_array_equal(restored([image], tokens).data, model([image], tokens).data)
        for name, value in model.state_dict().items():
            assert restored.state_dict()[name].dtype == value.dtype

    def test_resave_is_byte_identical(self, tmp_path, checkpoint):
        first = save_checkpoint(checkpoint, tmp_path / "a.ckpt")
        second = save_checkpoint(load_checkpoint(first), tmp_path / "b.ckpt")
        assert first.read_bytes() == second.read_bytes()

    def test_header_fields_survive(self, checkpoint, small_tokenizer):
        restored = Checkpoint.from_bytes(checkpoint.to_bytes())
        assert restored.training_step == 17
        assert restored.metadata == {"seed": 3}
        assert restored.tokenizer_sha256 == small_tokenizer.sha256()
        assert restored.tokenizer().encode("hello") == small_tokenizer.encode("hello")
        assert restored.config.to_dict() == checkpoint.config.to_dict()

    def test_starts_with_magic_and_version(self, checkpoint):
        data = checkpoint.to_bytes()
        assert data[:8] == MAGIC
        assert struct.unpack("<I", data[8:12])[0] == FORMAT_VERSION

    def test_parameter_table(self, checkpoint):
        table = checkpoint.parameter_table()
        assert {row["dtype"] for row in table} == {"float64"}
        assert sum(int(np.prod(row["shape"])) for row in table) == checkpoint.parameter_count()
        assert checkpoint.parameter_count() == checkpoint.config.parameter_count()

    def test_checkpoint_without_tokenizer(self):
        bare = Checkpoint.from_model(VisionEncoderDecoder(micro_config(), seed=1))
        restored = Checkpoint.from_bytes(bare.to_bytes())
        assert restored.tokenizer_sha256 is None
        with pytest.raises(CheckpointShapeError):
            restored.tokenizer()


class TestCorruption:
    def test_every_prefix_is_truncated(self, checkpoint):
        data = checkpoint.to_bytes()
        for cut in list(range(0, 40)) + list(range(40, len(data), max(1, len(data) // 200))):
            with pytest.raises(TruncatedCheckpointError):
                Checkpoint.from_bytes(data[:cut])

    def test_trailing_bytes(self, checkpoint):
        with pytest.raises(TruncatedCheckpointError):
            Checkpoint.from_bytes(checkpoint.to_bytes() + b"\x00")

    def test_corrupt_header(self, checkpoint):
        data = bytearray(checkpoint.to_bytes())
        data[16] = 0xFF
        with pytest.raises(TruncatedCheckpointError):
            Checkpoint.from_bytes(bytes(data))

    def test_bad_magic(self, checkpoint):
        with pytest.raises(CheckpointVersionError):
            Checkpoint.from_bytes(b"NOTACKPT" + checkpoint.to_bytes()[8:])

    def test_future_version(self, checkpoint):
        data = checkpoint.to_bytes()
        with pytest.raises(CheckpointVersionError) as excinfo:
            Checkpoint.from_bytes(data[:8] + struct.pack("<I", FORMAT_VERSION + 1) + data[12:])
        assert excinfo.value.details["found"] == FORMAT_VERSION + 1

    def test_blob_disagrees_with_config(self, checkpoint):
        name = "decoder.output_proj.bias"
        checkpoint.params[name] = np.zeros(checkpoint.params[name].shape[0] + 1)
        with pytest.raises(CheckpointShapeError):
            Checkpoint.from_bytes(checkpoint.to_bytes())

    def test_header_table_disagrees_with_blobs(self, checkpoint):
        def shrink(header):
            header["parameters"][0]["shape"] = [1]

        with pytest.raises(CheckpointShapeError):
            Checkpoint.from_bytes(_rewrite_header(checkpoint.to_bytes(), shrink))

    def test_tokenizer_hash_mismatch(self, checkpoint):
        def tamper(header):
            header["tokenizer"]["sha256"] = "0" * 64

        with pytest.raises(CheckpointShapeError):
            Checkpoint.from_bytes(_rewrite_header(checkpoint.to_bytes(), tamper))

    @pytest.mark.parametrize("drop", ["model", "tokenizer", "training_step", "parameters"])
    def test_header_missing_a_field(self, checkpoint, drop):
        def strip(header):
            del header[drop]

        with pytest.raises(TruncatedCheckpointError):
            Checkpoint.from_bytes(_rewrite_header(checkpoint.to_bytes(), strip))

    def test_header_with_invalid_model_config(self, checkpoint):
        def break_config(header):
            header["model"]["decoder"]["heads"] = 3

        with pytest.raises(CheckpointShapeError):
            Checkpoint.from_bytes(_rewrite_header(checkpoint.to_bytes(), break_config))

    def test_missing_file(self, tmp_path):
        with pytest.raises(StorageError):
            load_checkpoint(tmp_path / "absent.ckpt")

    def test_wrong_names_rejected_by_model(self, checkpoint):
        state = dict(checkpoint.params)
        state["decoder.extra"] = np.zeros(3)
        model = VisionEncoderDecoder(checkpoint.config)
        with pytest.raises(CheckpointShapeError):
            model.load_state_dict(state)
