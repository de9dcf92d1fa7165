"""Regenerates tests/data/cnn_parity: a small residual U-Net with random
weights, a reflect-padded input and the PyTorch reference output.

    python3 tests/fixtures/make_cnn_fixture.py tests/data/cnn_parity
"""

import struct
import sys
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

CHANNELS = [8, 16, 32]
BLOCKS = 2
T = 5
WIDTH, HEIGHT = 21, 18
SIGMA = 0.05
SEED = 20240611


def fnv1a(data: bytes, h: int) -> int:
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def write_qmrt(array: np.ndarray, path: Path) -> None:
    codes = {np.dtype("<f8"): 0, np.dtype("<f4"): 2}
    a = np.ascontiguousarray(array, dtype=array.dtype.newbyteorder("<"))
    with open(path, "wb") as f:
        f.write(b"QMRT" + bytes([1, codes[a.dtype], a.ndim]))
        f.write(struct.pack("<%dQ" % a.ndim, *a.shape))
        f.write(a.tobytes())


class ResBlock(nn.Module):
    def __init__(self, c):
        super().__init__()
        self.conv1 = nn.Conv2d(c, c, 3, padding=1, bias=False)
        self.conv2 = nn.Conv2d(c, c, 3, padding=1, bias=False)

    def forward(self, x):
        return x + self.conv2(F.relu(self.conv1(x)))


class Stage(nn.Module):
    def __init__(self, c, blocks, sample=None):
        super().__init__()
        for b in range(blocks):
            self.add_module(f"block{b}", ResBlock(c))
        if sample is not None:
            self.sample = sample
        self.blocks = blocks

    def run_blocks(self, x):
        for b in range(self.blocks):
            x = getattr(self, f"block{b}")(x)
        return x


class UNetRes(nn.Module):
    def __init__(self, channels, blocks, t):
        super().__init__()
        self.scales = len(channels)
        self.head = nn.Conv2d(t + 1, channels[0], 3, padding=1, bias=False)
        for s in range(self.scales - 1):
            down = nn.Conv2d(channels[s], channels[s + 1], 2, stride=2, bias=False)
            self.add_module(f"down{s}", Stage(channels[s], blocks, down))
        self.body = Stage(channels[-1], blocks)
        for s in range(self.scales - 2, -1, -1):
            up = nn.ConvTranspose2d(channels[s + 1], channels[s], 2, stride=2, bias=False)
            self.add_module(f"up{s}", Stage(channels[s], blocks, up))
        self.tail = nn.Conv2d(channels[0], t, 3, padding=1, bias=False)

    def forward(self, x):
        skips = [self.head(x)]
        x = skips[0]
        for s in range(self.scales - 1):
            stage = getattr(self, f"down{s}")
            x = stage.sample(stage.run_blocks(x))
            skips.append(x)
        x = self.body.run_blocks(x)
        for s in range(self.scales - 2, -1, -1):
            stage = getattr(self, f"up{s}")
            x = stage.run_blocks(stage.sample(x + skips[s + 1]))
        if self.scales > 1:
            x = x + skips[0]
        return self.tail(x)

    def ordered_layers(self):
        """Parameters in the archive's execution order."""
        names = ["head.weight"]
        for s in range(self.scales - 1):
            names += [f"down{s}.block{b}.conv{i}.weight" for b in range(BLOCKS) for i in (1, 2)]
            names.append(f"down{s}.sample.weight")
        names += [f"body.block{b}.conv{i}.weight" for b in range(BLOCKS) for i in (1, 2)]
        for s in range(self.scales - 2, -1, -1):
            names.append(f"up{s}.sample.weight")
            names += [f"up{s}.block{b}.conv{i}.weight" for b in range(BLOCKS) for i in (1, 2)]
        names.append("tail.weight")
        params = dict(self.named_parameters())
        assert sorted(names) == sorted(params)
        return [(n, params[n].detach().numpy().astype(np.float32)) for n in names]


def infer(net, x_norm, sigma):
    mult = 2 ** (net.scales - 1)
    t, h, w = x_norm.shape
    ph, pw = -(-h // mult) * mult, -(-w // mult) * mult
    x = torch.from_numpy(x_norm.astype(np.float32))[None]
    x = F.pad(x, (0, pw - w, 0, ph - h), mode="reflect")
    noise = torch.full((1, 1, ph, pw), sigma, dtype=torch.float32)
    with torch.no_grad():
        y = net(torch.cat([x, noise], dim=1))
    return y[0, :, :h, :w].numpy().astype(np.float64)


def main(out: Path) -> None:
    torch.manual_seed(SEED)
    net = UNetRes(CHANNELS, BLOCKS, T).eval()
    # shrink the default init so activations stay O(1) through the residual chain
    with torch.no_grad():
        for p in net.parameters():
            p.mul_(0.5)

    weights = out / "weights"
    weights.mkdir(parents=True, exist_ok=True)
    manifest = [
        ("architecture", "unet-res"),
        ("scales", str(len(CHANNELS))),
        ("channels", " ".join(map(str, CHANNELS))),
        ("blocks", str(BLOCKS)),
        ("in_channels", str(T + 1)),
        ("out_channels", str(T)),
        ("activation", "relu"),
        ("head_kernel", "3"),
        ("body_kernel", "3"),
        ("tail_kernel", "3"),
        ("sample_kernel", "2"),
    ]
    h = 0xCBF29CE484222325
    for name, w in net.ordered_layers():
        manifest.append(("layer", name + " " + " ".join(map(str, w.shape))))
        write_qmrt(w, weights / f"{name}.qmrt")
        h = fnv1a(name.encode(), h)
        h = fnv1a(w.astype("<f4").tobytes(), h)
    manifest.append(("hash", f"{h:016x}"))
    (weights / "manifest.txt").write_text("".join(f"{k} = {v}\n" for k, v in manifest))

    rng = np.random.default_rng(SEED)
    x = rng.uniform(0.0, 1.0, size=(T, HEIGHT, WIDTH))
    write_qmrt(x, out / "input.qmrt")
    write_qmrt(infer(net, x, SIGMA), out / "output.qmrt")
    (out / "sigma.txt").write_text(f"{SIGMA}\n")


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "tests/data/cnn_parity"))
