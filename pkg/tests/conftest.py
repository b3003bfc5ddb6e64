import pytest
import torch

from vatcmr.config import TrainConfig
from vatcmr.data import build_dataset

# Keep CPU math deterministic and cheap across the whole suite.
torch.set_num_threads(2)


def tiny_config(**overrides) -> TrainConfig:
    base = dict(
        ce_epochs=2,
        triplet_epochs=2,
        embedding_dim=16,
        attention_tokens=2,
        attention_heads=2,
        image_channels=(4, 8),
        audio_channels=(4, 8, 8),
        seed=0,
    )
    base.update(overrides)
    return TrainConfig(**base)


@pytest.fixture(scope="session")
def tiny_dataset():
    """3 classes, 16x16 images, 256-sample audio; shared across tests."""
    return build_dataset(3, (24, 9, 9), seed=11, image_size=16, audio_length=256)


@pytest.fixture(scope="session")
def small_dataset():
    """5 classes at small-but-trainable scale for learning-dynamics tests."""
    return build_dataset(5, (100, 25, 25), seed=5, image_size=32, audio_length=1024)
