from .checkpoint import load_checkpoint, read_checkpoint, save_checkpoint
from .config import ModelConfig
from .embedding import (PAD, IdEmbeddingTable, ProjectionLayer, project_content, resolve_embedding,
                        resolve_embeddings, sample_path_mask)
from .sasrec import DenseRecModel, pad_batch, score_items
from .transformer import TransformerBlockParams, attention_mask, transformer_block_forward

ModelState = DenseRecModel

__all__ = [
    "PAD", "ModelConfig", "ModelState", "DenseRecModel", "IdEmbeddingTable", "ProjectionLayer",
    "TransformerBlockParams", "attention_mask", "transformer_block_forward", "project_content",
    "resolve_embedding", "resolve_embeddings", "sample_path_mask", "pad_batch", "score_items",
    "save_checkpoint", "load_checkpoint", "read_checkpoint",
]
