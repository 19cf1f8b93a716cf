"""Model artifact creation and loading.

The server works with any local Hugging Face causal-LM directory whose
architecture exposes an output embedding head and a final normalization
layer (GPT-2, Llama and NeoX families), paired with a byte-level
tokenizer, which requires a vocabulary of exactly 256.

``make_tiny_model`` builds a deterministic, seeded, randomly initialized
GPT-2 over that byte vocabulary.  At under 300k parameters it forwards in
milliseconds on a CPU, which is all the protocol conformance suite needs;
nothing in the server is specific to it.
"""

from dataclasses import dataclass

import torch

__all__ = ["make_tiny_model", "LoadedModel", "load_model"]

BYTE_VOCAB = 256


def _silence_progress_bars() -> None:
    try:
        from transformers.utils import logging as hf_logging

        hf_logging.disable_progress_bar()
    except ImportError:
        pass


def make_tiny_model(
    out_dir: str,
    seed: int = 0,
    n_layer: int = 4,
    n_embd: int = 64,
    n_head: int = 4,
    n_positions: int = 1024,
) -> str:
    """Create and save a seeded random byte-vocabulary GPT-2; returns out_dir."""
    from transformers import GPT2Config, GPT2LMHeadModel

    _silence_progress_bars()
    torch.manual_seed(seed)
    config = GPT2Config(
        vocab_size=BYTE_VOCAB,
        n_positions=n_positions,
        n_embd=n_embd,
        n_layer=n_layer,
        n_head=n_head,
        bos_token_id=None,
        eos_token_id=None,
    )
    GPT2LMHeadModel(config).save_pretrained(out_dir)
    return out_dir


@dataclass
class LoadedModel:
    model: "torch.nn.Module"
    head: "torch.nn.Module"
    final_norm: "torch.nn.Module"
    vocab_size: int
    num_layers: int
    max_context: int
    eos_token_id: "int | None"


def _find_final_norm(model) -> "torch.nn.Module":
    # Normalization applied before the output head; attribute path varies
    # by architecture family.
    for path in ("transformer.ln_f", "model.norm", "gpt_neox.final_layer_norm"):
        obj = model
        try:
            for part in path.split("."):
                obj = getattr(obj, part)
        except AttributeError:
            continue
        return obj
    raise ValueError(
        "cannot locate the model's final normalization layer; supported "
        "families: GPT-2, Llama, NeoX"
    )


def load_model(model_dir: str, device: str = "cpu") -> LoadedModel:
    from transformers import AutoModelForCausalLM

    _silence_progress_bars()
    model = AutoModelForCausalLM.from_pretrained(model_dir)
    model.to(device)
    model.eval()
    config = model.config
    vocab_size = int(config.vocab_size)
    if vocab_size != BYTE_VOCAB:
        raise ValueError(
            f"the byte-level tokenizer needs vocab_size == {BYTE_VOCAB}, "
            f"model has {vocab_size}"
        )
    head = model.get_output_embeddings()
    if head is None:
        raise ValueError("model has no output embedding head")
    return LoadedModel(
        model=model,
        head=head,
        final_norm=_find_final_norm(model),
        vocab_size=vocab_size,
        num_layers=int(config.num_hidden_layers),
        max_context=int(config.max_position_embeddings),
        eos_token_id=config.eos_token_id,
    )
