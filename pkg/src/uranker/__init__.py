"""Ranking-based underwater image quality assessment and ranker-supervised
enhancement."""

__version__ = "0.1.0"

from .enhancer import Enhancer, EnhancerConfig, normalization_tail
from .histograms import channel_histogram
from .losses import margin_ranking_loss, ranker_guidance_loss, total_enhancement_loss
from .metrics import krcc, psnr, srcc, ssim
from .ranker import Ranker, RankerConfig, dynamic_connect
from .training import RankPair, TrainRecipe, sample_pairs, train_ranker
from .uie_training import UieRecipe, train_enhancer

__all__ = [
    "Enhancer",
    "EnhancerConfig",
    "normalization_tail",
    "channel_histogram",
    "margin_ranking_loss",
    "ranker_guidance_loss",
    "total_enhancement_loss",
    "krcc",
    "psnr",
    "srcc",
    "ssim",
    "Ranker",
    "RankerConfig",
    "dynamic_connect",
    "RankPair",
    "TrainRecipe",
    "sample_pairs",
    "train_ranker",
    "UieRecipe",
    "train_enhancer",
]
