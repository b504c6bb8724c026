from .augment import AugmentationSpec, augment, rotate_nearest
from .encoder import EncoderParams, init_params, forward, backward, backbone_features
from .io import (
    EmbeddingMatrix,
    ModelCheckpoint,
    export_embeddings,
    import_embeddings,
    load_checkpoint,
    save_checkpoint,
)
from .loss import ntxent_loss
from .train import TrainConfig, distill, embed_corpus, train_ssl

__all__ = [
    "AugmentationSpec",
    "augment",
    "rotate_nearest",
    "EncoderParams",
    "init_params",
    "forward",
    "backward",
    "backbone_features",
    "EmbeddingMatrix",
    "ModelCheckpoint",
    "export_embeddings",
    "import_embeddings",
    "save_checkpoint",
    "load_checkpoint",
    "ntxent_loss",
    "TrainConfig",
    "train_ssl",
    "embed_corpus",
    "distill",
]
