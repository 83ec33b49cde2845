import json

import pytest

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "he", "went", "to", "the", "bank", "river", "money", "water",
    "for", "during", "summer", "a", "deposit",
    "un", "##fold", "##ing", "swim", "##s",
]


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    """A small randomly initialized masked-LM checkpoint, built offline."""
    from tokenizers import BertWordPieceTokenizer
    from transformers import BertConfig, BertModel, BertTokenizerFast

    model_dir = tmp_path_factory.mktemp("tiny_model")
    vocab_path = model_dir / "base_vocab.txt"
    vocab_path.write_text("\n".join(VOCAB) + "\n", encoding="utf-8")
    wp = BertWordPieceTokenizer(str(vocab_path), lowercase=True)
    tokenizer = BertTokenizerFast(tokenizer_object=wp)
    tokenizer.save_pretrained(model_dir)

    import torch

    torch.manual_seed(7)
    config = BertConfig(
        vocab_size=len(VOCAB), hidden_size=32, num_hidden_layers=2,
        num_attention_heads=2, intermediate_size=64, max_position_embeddings=64,
    )
    BertModel(config).save_pretrained(model_dir)
    return model_dir


def write_corpus(path, docs):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in docs:
            fh.write(json.dumps(rec) + "\n")
    return path
