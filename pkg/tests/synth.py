"""Synthetic corpora for training tests: token sequences whose class and
intensity labels both derive from one latent score (the mean of per-word
scores), either as in-memory encoded arrays or as an on-disk corpus with all
the resource files a CLI run needs."""

import json
import string

import numpy as np

from mtaffect.model import EncodedDataset


def make_vocab(size, seed=0):
    letters = string.ascii_lowercase
    words = []
    i = 0
    while len(words) < size:
        a, b = divmod(i, 26)
        words.append("w" + letters[a % 26] + letters[b])
        i += 1
    # word scores cover [0, 1] evenly so every latent value is expressible
    scores = np.linspace(0.0, 1.0, size)
    return words, scores


def latent_to_class(latent):
    return int(np.clip(np.floor(latent * 7.0), 0, 6)) - 3


def sample_tokens(latent, length, scores, rng, spread=0.08):
    """Token indices whose word scores scatter around the tweet's latent."""
    targets = np.clip(latent + rng.normal(scale=spread, size=length), 0.0, 1.0)
    return np.abs(scores[None, :] - targets[:, None]).argmin(axis=1)


def make_encoded(n, seed, t=8, d=10, vocab=30, noise=0.005):
    """In-memory EncodedDataset with a score-bearing embedding column."""
    rng = np.random.default_rng(seed)
    table_rng = np.random.default_rng(777)
    scores = np.linspace(0.0, 1.0, vocab)
    table = table_rng.normal(scale=0.2, size=(vocab, d))
    table[:, 0] = (scores - 0.5) * 2.0
    ids, xs, masks, feats, y_class, y_int = [], [], [], [], [], []
    for i in range(n):
        length = int(rng.integers(3, t + 1))
        latent = float(rng.uniform(0.02, 0.98))
        tokens = sample_tokens(latent, length, scores, rng)
        x = np.zeros((t, d))
        x[:length] = table[tokens]
        mask = np.zeros(t, dtype=bool)
        mask[:length] = True
        intensity = float(np.clip(latent + rng.normal(scale=noise), 0.0, 1.0))
        ids.append(f"syn{i}")
        xs.append(x)
        masks.append(mask)
        feats.append([scores[tokens].sum(), float(length)])
        y_class.append(latent_to_class(latent))
        y_int.append(intensity)
    return EncodedDataset(
        ids=ids,
        x=np.array(xs),
        mask=np.array(masks),
        feats=np.array(feats),
        y_class=np.array(y_class, dtype=int),
        y_intensity=np.array(y_int, dtype=float),
    )


CLASS_DESCRIPTIONS = {
    -3: "very negative", -2: "moderately negative", -1: "slightly negative",
    0: "neutral or mixed", 1: "slightly positive", 2: "moderately positive",
    3: "very positive",
}


def write_corpus(root, n_train=800, n_dev=120, n_test=120, seed=0, vocab_size=40,
                 max_len=12, embed_dim=8, word_dim=6):
    """Write a complete synthetic corpus plus resources and return the run
    config dict (paths all under `root`)."""
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    words, scores = make_vocab(vocab_size, seed=seed + 1)

    def sample_split(n, name, split_seed):
        r = np.random.default_rng(split_seed)
        rows = []
        for i in range(n):
            length = int(r.integers(4, max_len - 1))
            latent = float(r.uniform(0.02, 0.98))
            idx = sample_tokens(latent, length, scores, r)
            intensity = float(np.clip(latent + r.normal(scale=0.01), 0.0, 1.0))
            cls = latent_to_class(latent)
            text = " ".join(words[j] for j in idx)
            rows.append((f"{name}{i:04d}", text, cls, intensity))
        return rows

    for name, n, split_seed in [
        ("train", n_train, seed + 10),
        ("dev", n_dev, seed + 20),
        ("test", n_test, seed + 30),
    ]:
        with open(root / f"{name}.tsv", "w", encoding="utf-8") as f:
            f.write("ID\tTweet\tAffect Dimension\tLabel\tIntensity\n")
            for tid, text, cls, intensity in sample_split(n, name, split_seed):
                f.write(
                    f"{tid}\t{text}\tvalence\t{cls}: {CLASS_DESCRIPTIONS[cls]}"
                    f"\t{intensity}\n"
                )

    with open(root / "freq.tsv", "w", encoding="utf-8") as f:
        for w in words:
            f.write(f"{w}\t100\n")
    with open(root / "emoji.tsv", "w", encoding="utf-8") as f:
        f.write("\U0001F602\tlaughing\n")

    with open(root / "word_vectors.txt", "w", encoding="utf-8") as f:
        for w, s in zip(words, scores):
            vec = rng.normal(scale=0.2, size=word_dim)
            vec[0] = (s - 0.5) * 2.0
            f.write(w + " " + " ".join(f"{v:.6f}" for v in vec) + "\n")
    with open(root / "char_vectors.txt", "w", encoding="utf-8") as f:
        for ch in string.ascii_lowercase:
            vec = rng.normal(scale=0.2, size=embed_dim)
            f.write(ch + " " + " ".join(f"{v:.6f}" for v in vec) + "\n")
    with open(root / "emoji_vectors.txt", "w", encoding="utf-8") as f:
        vec = rng.normal(scale=0.2, size=embed_dim)
        f.write("\U0001F602 " + " ".join(f"{v:.6f}" for v in vec) + "\n")

    with open(root / "scores.tsv", "w", encoding="utf-8") as f:
        f.write("wordscore\tvalence\n")
        for w, s in zip(words, scores):
            f.write(f"{w}\t{(s - 0.5) * 6.0:.6f}\n")

    config = {
        "data": {
            "train": str(root / "train.tsv"),
            "dev": str(root / "dev.tsv"),
            "test": str(root / "test.tsv"),
            "kind": "both",
        },
        "resources": {
            "freq_lexicon": str(root / "freq.tsv"),
            "emoji_lexicon": str(root / "emoji.tsv"),
            "word_vectors": str(root / "word_vectors.txt"),
            "word_dim": word_dim,
            "emoji_vectors": str(root / "emoji_vectors.txt"),
            "char_vectors": str(root / "char_vectors.txt"),
        },
        "features": {
            "scored_lexicons": [str(root / "scores.tsv")],
            "external": [],
            "order": ["lexicons"],
            "allow_missing": False,
        },
        "model": {
            "max_len": max_len,
            "embed_dim": embed_dim,
            "gru_hidden": 8,
            "filter_widths": [2, 3],
            "filters_per_width": 4,
            "dropout": 0.2,
            "lr": 0.01,
            "batch_size": 32,
            "max_epochs": 40,
            "patience": 40,
            # MSE on [0,1] targets is tiny next to CE; weight it up so the
            # shared encoder serves both heads
            "loss_weight_lambda": 5.0,
        },
        "shallow": {"c": 1.0, "epsilon": 0.05, "epochs": 60, "standardize": True},
        "seeds": [1, 2, 3, 4, 5],
        "out_dir": str(root / "runs"),
    }
    config_path = root / "config.json"
    with open(config_path, "w", encoding="utf-8") as f:
        json.dump(config, f, indent=2)
    return config_path, config
