from .gcn import GcnModel, gcn_layer, lp_loss, nc_loss, neighbour_mask
from .heads import fermi_dirac, fermi_dirac_logit, type_probability
from .kg import KgModel, kg_loss, kg_rank_metrics, kg_score, metrics_from_ranks, sample_negatives
from .transformer import EncoderBlock, ToyTransformerEncoder, token_cross_entropy, toy_transformer_forward

__all__ = [
    "GcnModel", "gcn_layer", "lp_loss", "nc_loss", "neighbour_mask",
    "fermi_dirac", "fermi_dirac_logit", "type_probability",
    "KgModel", "kg_loss", "kg_rank_metrics", "kg_score", "metrics_from_ranks", "sample_negatives",
    "EncoderBlock", "ToyTransformerEncoder", "token_cross_entropy", "toy_transformer_forward",
]
