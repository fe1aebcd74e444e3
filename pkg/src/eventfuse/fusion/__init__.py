"""Illumination-guided event/RGB feature fusion: model, loss, training, adapters."""

from .baselines import HeadModel, HeadSample, baseline_postfusion, baseline_prefusion
from .checkpoint import load_checkpoint, save_checkpoint, write_loss_history
from .gradcheck import fd_gradcheck, gradcheck
from .lora import AdaptedModel, LoraAdapter, lora_attach, lora_merge
from .mlp import Layer, Mlp, init_mlp, mlp_backward, mlp_forward, mlp_forward_cached, mlp_from_weights
from .model import (FusionDims, FusionModel, Triplet, batch_loss, fusion_forward,
                    init_fusion_model, loss_ic)
from .optim import AdamState, TrainConfig, adam_step
from .train import corpus_loss, fit, infer_dims, train_stage1, train_stage2_lora
