"""Model and tokenizer loading, with an offline fallback.

The requested checkpoint is tried first. When the hub is unreachable (this
is common for sandboxed runs) the fallback is a seeded randomly initialized
GPT-2-class model: the published dimensions (d=768, v=50257) and the whole
extraction pipeline stay exercisable, only the representations carry no
pretrained knowledge. The fallback pairs with WordHashTokenizer since
pretrained tokenizer files are equally unreachable offline.
"""

import torch

from .errors import ModelLoadError
from .tokenizer import FALLBACK_VOCAB, WordHashTokenizer


def load_model(model_id, seed):
    """Return (model, tokenizer, source_tag); model is in eval mode."""
    try:
        from transformers import AutoModelForCausalLM, AutoTokenizer
        tok = AutoTokenizer.from_pretrained(model_id)
        model = AutoModelForCausalLM.from_pretrained(model_id)
        model.eval()
        return model, tok, f"pretrained:{model_id}"
    except Exception:
        pass
    try:
        from transformers import GPT2Config, GPT2LMHeadModel
        torch.manual_seed(seed)
        config = GPT2Config()  # n_embd=768, vocab_size=50257
        assert config.n_embd == 768 and config.vocab_size == FALLBACK_VOCAB
        model = GPT2LMHeadModel(config)
        model.eval()
        return model, WordHashTokenizer(config.vocab_size), \
            f"random-init:gpt2-class:seed={seed}"
    except Exception as e:
        raise ModelLoadError(f"could not load {model_id!r} nor build the "
                             f"fallback: {e}") from e


def export_head(model):
    """The output projection arranged d x v, so hidden @ head = logits.

    torch Linear stores weight as (v, d) and computes h @ weight.T; for
    tied-embedding models that weight is the embedding matrix itself, so this
    is the transpose of the embedding view. Models whose output projection
    carries a bias cannot be represented; the orientation probe catches them.
    """
    head = model.get_output_embeddings()
    if head is None:
        raise ModelLoadError("model exposes no output projection")
    return head.weight.detach().to(torch.float32).numpy().T.copy()


@torch.no_grad()
def forward_last_position(model, input_ids):
    """One forward pass; returns (final hidden state, runtime logits) at the
    last non-padding position. Prompts are run unpadded one at a time, so the
    last position is simply the final token."""
    ids = torch.as_tensor(input_ids, dtype=torch.long).unsqueeze(0)
    out = model(input_ids=ids, output_hidden_states=True)
    hidden = out.hidden_states[-1][0, -1, :].to(torch.float32).numpy().copy()
    logits = out.logits[0, -1, :].to(torch.float32).numpy().copy()
    return hidden, logits
