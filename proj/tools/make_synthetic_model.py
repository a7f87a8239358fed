"""Regenerates data/synthetic_ood_model.json (fixed seed)."""
import json
import pathlib

import numpy as np


def layer(rng, n_out, n_in, activation):
    w = rng.normal(0.0, 1.0 / np.sqrt(n_in), size=(n_out, n_in))
    b = rng.normal(0.0, 0.1, size=n_out)
    return {
        "activation": activation,
        "weights": {"kind": "deterministic", "values": w.tolist()},
        "bias": {"kind": "deterministic", "values": b.tolist()},
    }


def main():
    rng = np.random.default_rng(20211206)
    n_in, hidden, classes = 8, 12, 4
    model = {
        "input_dim": n_in,
        "layers": [layer(rng, hidden, n_in, "identity"), layer(rng, classes, hidden, "relu")],
    }
    out = pathlib.Path(__file__).resolve().parent.parent / "data" / "synthetic_ood_model.json"
    out.write_text(json.dumps(model, indent=1) + "\n")


if __name__ == "__main__":
    main()
