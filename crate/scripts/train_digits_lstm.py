"""Train the small digits LSTM used by the frame-trend tests.

Images from sklearn's digits set are shrunk to 5x5 and centred on a blank
7x7 canvas, the same digit-to-canvas ratio as MNIST's 20x20 digits on 28x28.
Rows are read top to bottom: 7 frames of 7 pixels each. The model is one LSTM layer with 8 hidden units
followed by a dense layer over the last hidden state.

Writes crates/core/tests/fixtures/digits_lstm.json (model),
digits_input.json (10 held-out test images) and digits_reference.json
(torch logits for those images, to check the Rust forward pass).
"""

import json
import pathlib

import numpy as np
import torch
from skimage.transform import resize
from sklearn.datasets import load_digits

SEED = 0
HIDDEN = 8
FRAMES = 7
DIGIT = 5
N_TRAIN = 1000
EPOCHS = 180  # stops near 90% train accuracy
OUT = pathlib.Path(__file__).resolve().parent.parent / "crates/core/tests/fixtures"


def load():
    d = load_digits()
    pad = (FRAMES - DIGIT) // 2
    imgs = np.zeros((len(d.images), FRAMES, FRAMES))
    for k, im in enumerate(d.images):
        imgs[k, pad : pad + DIGIT, pad : pad + DIGIT] = resize(im / 16.0, (DIGIT, DIGIT), anti_aliasing=True)
    return imgs.astype(np.float32), d.target


class Net(torch.nn.Module):
    def __init__(self):
        super().__init__()
        self.lstm = torch.nn.LSTM(FRAMES, HIDDEN, batch_first=True)
        self.dense = torch.nn.Linear(HIDDEN, 10)

    def forward(self, x):
        h, _ = self.lstm(x)
        return self.dense(h[:, -1, :])


def kernel(w_ih, w_hh):
    # torch stores (H, in) and (H, H); the model file wants (in + H) x H.
    return np.concatenate([w_ih.T, w_hh.T], axis=0)


def matrix(m):
    m = np.asarray(m, dtype=np.float64)
    return {"rows": int(m.shape[0]), "cols": int(m.shape[1]), "data": [float(v) for v in m.ravel()]}


def export(net):
    H = HIDDEN
    w_ih = net.lstm.weight_ih_l0.detach().double().numpy()
    w_hh = net.lstm.weight_hh_l0.detach().double().numpy()
    b = (net.lstm.bias_ih_l0 + net.lstm.bias_hh_l0).detach().double().numpy()
    # torch gate order: input, forget, cell, output.
    gates = {name: slice(k * H, (k + 1) * H) for k, name in enumerate("ifco")}
    layer = {"type": "lstm", "hidden": H}
    for g in "fioc":
        s = gates[g]
        layer[f"w_{g}"] = matrix(kernel(w_ih[s], w_hh[s]))
        layer[f"b_{g}"] = [float(v) for v in b[s]]
    dense = {
        "type": "affine",
        "weights": matrix(net.dense.weight.detach().double().numpy()),
        "bias": [float(v) for v in net.dense.bias.detach().double().numpy()],
    }
    return {
        "format": "polycert-model/1",
        "input_dim": FRAMES,
        "frames": FRAMES,
        "layers": [layer, dense],
    }


def main():
    torch.manual_seed(SEED)
    rng = np.random.default_rng(SEED)
    x, y = load()
    order = rng.permutation(len(x))
    train, test = order[:N_TRAIN], order[N_TRAIN:]
    xt = torch.tensor(x[train])
    yt = torch.tensor(y[train])
    net = Net()
    opt = torch.optim.Adam(net.parameters(), lr=0.02)
    for _ in range(EPOCHS):
        opt.zero_grad()
        loss = torch.nn.functional.cross_entropy(net(xt), yt)
        loss.backward()
        opt.step()
    with torch.no_grad():
        acc = (net(xt).argmax(1) == yt).float().mean().item()
        xs = torch.tensor(x[test])
        pred = net(xs).argmax(1).numpy()
        test_acc = float((pred == y[test]).mean())
    print(f"train accuracy {acc:.3f}, test accuracy {test_acc:.3f}")

    picked = [i for i, p in zip(test, pred) if p == y[i]][:10]
    examples = [{"data": [float(v) for v in x[i].ravel()], "label": int(y[i])} for i in picked]
    with torch.no_grad():
        logits = net(torch.tensor(x[picked])).double().numpy()

    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "digits_lstm.json").write_text(json.dumps(export(net)) + "\n")
    (OUT / "digits_input.json").write_text(
        json.dumps({"format": "polycert-input/1", "examples": examples}) + "\n"
    )
    (OUT / "digits_reference.json").write_text(
        json.dumps({"train_accuracy": acc, "logits": logits.tolist()}) + "\n"
    )


if __name__ == "__main__":
    main()
