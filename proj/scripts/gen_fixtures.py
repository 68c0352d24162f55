# Copyright 2026 The roadseg Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
# ==============================================================================
"""Writes the golden fixture directory consumed by `roadseg selftest`.

The reference network is an independent PyTorch build of the full model on
top of torchvision's ResNet-18 modules. Weights are seeded random, and BN
statistics are calibrated on flipped and jittered copies of the fixture image
so that activations stay bounded. Nothing here is needed to build or test the C++ code;
the output is committed.

Usage: python scripts/gen_fixtures.py [--out tests/fixtures/golden] [--seed 7]
"""

import argparse
import json
import pathlib
import struct
import zlib

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image
from torch import nn
from torchvision.models import resnet18

MEAN = (0.485, 0.456, 0.406)
STD = (0.229, 0.224, 0.225)
HEIGHT, WIDTH = 64, 128
CSB_RATIO = (2, 4)
TOLERANCE = 1e-4

TAPS = [
    "input", "csb.input", "f1_high", "f2_low", "agg.block1.out", "agg.block2.out",
    "fa_low", "adjusted", "attention", "fused", "logits_low", "logits", "prob",
]


# ------------------------------------------------------------------------------
# .lfdw container


def encode_lfdw(entries):
  """entries: list of (name, np.ndarray float32)."""
  out = bytearray(b"LFDW")
  out += struct.pack("<II", 1, len(entries))
  for name, array in entries:
    raw = name.encode("utf-8")
    array = np.ascontiguousarray(array, dtype="<f4")
    out += struct.pack("<H", len(raw)) + raw
    out += struct.pack("<BB", 0, array.ndim)
    out += struct.pack("<%dI" % array.ndim, *array.shape)
    out += array.tobytes()
  out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
  return bytes(out)


def decode_lfdw(data):
  assert data[:4] == b"LFDW"
  assert struct.unpack_from("<I", data, len(data) - 4)[0] == zlib.crc32(data[:-4]) & 0xFFFFFFFF
  version, count = struct.unpack_from("<II", data, 4)
  assert version == 1
  pos, entries = 12, {}
  for _ in range(count):
    (n,) = struct.unpack_from("<H", data, pos)
    name = data[pos + 2:pos + 2 + n].decode("utf-8")
    pos += 2 + n
    dtype, ndim = struct.unpack_from("<BB", data, pos)
    assert dtype == 0
    dims = struct.unpack_from("<%dI" % ndim, data, pos + 2)
    pos += 2 + 4 * ndim
    size = int(np.prod(dims)) if dims else 1
    entries[name] = np.frombuffer(data, "<f4", size, pos).reshape(dims)
    pos += 4 * size
  assert pos == len(data) - 4
  return entries


# ------------------------------------------------------------------------------
# Model


class Pointwise(nn.Module):
  """1x1 conv with bias, BN, ReLU."""

  def __init__(self, cin, cout):
    super().__init__()
    self.conv = nn.Conv2d(cin, cout, 1, bias=True)
    self.bn = nn.BatchNorm2d(cout)

  def forward(self, x):
    return F.relu(self.bn(self.conv(x)))


class CrossConv(nn.Module):
  """Depthwise 1x5 then 5x1, a pointwise block and an identity shortcut."""

  def __init__(self, c, dilation):
    super().__init__()
    self.row = nn.Conv2d(c, c, (1, 5), padding=(0, 2 * dilation), dilation=(1, dilation),
                         groups=c, bias=True)
    self.col = nn.Conv2d(c, c, (5, 1), padding=(2, 0), groups=c, bias=True)
    self.pw = Pointwise(c, c)

  def forward(self, x):
    return self.pw(self.col(self.row(x))) + x


class Trunk(nn.Module):
  """ResNet-18 stem plus the first `stages` stages."""

  def __init__(self, stages):
    super().__init__()
    r = resnet18(weights=None)
    self.stem = nn.ModuleDict({"conv": r.conv1, "bn": r.bn1})
    self.layers = nn.ModuleList([r.layer1, r.layer2, r.layer3, r.layer4][:stages])

  def forward(self, x):
    x = F.max_pool2d(F.relu(self.stem["bn"](self.stem["conv"](x))), 3, 2, 1)
    for layer in self.layers:
      x = layer(x)
    return x


class FullModel(nn.Module):

  def __init__(self):
    super().__init__()
    self.sdb = Trunk(1)
    self.csb = Trunk(2)
    self.agg1 = CrossConv(128, 2)
    self.agg2 = CrossConv(128, 1)
    self.adjust = Pointwise(64, 128)
    self.attn = Pointwise(256, 128)
    self.attn_proj = nn.Conv2d(128, 1, 1, bias=True)
    self.head = Pointwise(128, 128)
    self.cls = nn.Conv2d(128, 2, 1, bias=True)

  def forward(self, x):
    t = {"input": x}
    h, w = x.shape[-2:]
    f1 = self.sdb(x)
    t["f1_high"] = f1
    small = F.interpolate(x, size=(h // CSB_RATIO[0], w // CSB_RATIO[1]), mode="bilinear",
                          align_corners=False)
    t["csb.input"] = small
    f2 = self.csb(small)
    t["f2_low"] = f2
    a = self.agg1(f2)
    t["agg.block1.out"] = a
    a = self.agg2(a)
    t["agg.block2.out"] = a
    fa = F.interpolate(a, size=f1.shape[-2:], mode="bilinear", align_corners=False)
    t["fa_low"] = fa
    adjusted = self.adjust(f1)
    t["adjusted"] = adjusted
    att = torch.sigmoid(self.attn_proj(self.attn(torch.cat([adjusted, fa], 1))))
    t["attention"] = att
    fused = adjusted * att + fa
    t["fused"] = fused
    logits = self.cls(self.head(fused))
    t["logits_low"] = logits
    logits = F.interpolate(logits, size=(h, w), mode="bilinear", align_corners=False)
    t["logits"] = logits
    t["prob"] = torch.softmax(logits, 1)[:, 1:2]
    return t


def slot_name(key):
  """Maps a state_dict key to the engine's slot name."""
  parts = key.split(".")
  head = parts[0]
  if head in ("sdb", "csb"):
    if parts[1] == "stem":
      return ".".join([head, "stem"] + parts[2:])
    # sdb.layers.0.<block>... -> sdb.layer1.<block>...
    stage = int(parts[2]) + 1
    rest = parts[3:]
    if "downsample" in rest:
      i = rest.index("downsample")
      rest[i + 1] = {"0": "conv", "1": "bn"}[rest[i + 1]]
    return ".".join([head, "layer%d" % stage] + rest)
  renames = {
      "agg1": "agg.block1", "agg2": "agg.block2", "adjust": "fuse.adjust",
      "attn": "fuse.attn", "attn_proj": "fuse.attn.proj", "head": "head", "cls": "head.cls",
  }
  return ".".join([renames[head]] + parts[1:])


# ------------------------------------------------------------------------------
# Fixture image


def road_image(rng):
  """A synthetic driving scene: sky, grass and a trapezoidal road with lane marks."""
  y, x = np.mgrid[0:HEIGHT, 0:WIDTH].astype(np.float32)
  img = np.zeros((HEIGHT, WIDTH, 3), np.float32)
  horizon = HEIGHT * 0.4
  img[:] = (70, 120, 50)
  sky = y < horizon
  img[sky] = np.stack([150 + 40 * y[sky] / horizon, 180 + 30 * y[sky] / horizon,
                       235 + 0 * y[sky]], -1)
  depth = np.clip((y - horizon) / (HEIGHT - horizon), 0, 1)
  half = 6 + depth * WIDTH * 0.45
  road = (~sky) & (np.abs(x - WIDTH / 2) < half)
  img[road] = (95, 95, 100)
  lane = road & (np.abs(x - WIDTH / 2) < 0.6 + depth) & ((y // 4) % 2 == 0)
  img[lane] = (235, 235, 220)
  img += rng.normal(0, 8, img.shape)
  return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def to_input(rgb):
  x = torch.from_numpy(rgb).permute(2, 0, 1).float().unsqueeze(0) / 255.0
  mean = torch.tensor(MEAN).view(1, 3, 1, 1)
  std = torch.tensor(STD).view(1, 3, 1, 1)
  return (x - mean) / std


# ------------------------------------------------------------------------------


def calibrate(model, x, rng):
  """Sets BN running stats from flipped and jittered copies of the input, then
  perturbs the affine parameters so no layer is an exact identity."""
  for m in model.modules():
    if isinstance(m, nn.BatchNorm2d):
      m.reset_running_stats()
      m.momentum = None  # cumulative average
  model.train()
  with torch.no_grad():
    batch = torch.cat([x, x.flip(-1), x + 0.1 * torch.randn_like(x), x * 0.9])
    model(batch)
  model.eval()
  with torch.no_grad():
    for m in model.modules():
      if isinstance(m, nn.BatchNorm2d):
        m.weight.copy_(torch.from_numpy(rng.uniform(0.5, 1.5, m.num_features)).float())
        m.bias.copy_(torch.from_numpy(rng.normal(0, 0.1, m.num_features)).float())
      elif isinstance(m, nn.Conv2d) and m.bias is not None:
        m.bias.copy_(torch.from_numpy(rng.normal(0, 0.05, m.out_channels)).float())


def main():
  parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
  root = pathlib.Path(__file__).resolve().parent.parent
  parser.add_argument("--out", type=pathlib.Path, default=root / "tests" / "fixtures" / "golden")
  parser.add_argument("--manifest", type=pathlib.Path, default=root / "manifests" / "full.txt")
  parser.add_argument("--seed", type=int, default=7)
  args = parser.parse_args()

  torch.manual_seed(args.seed)
  rng = np.random.default_rng(args.seed)
  torch.set_num_threads(1)

  rgb = road_image(rng)
  x = to_input(rgb)
  model = FullModel()
  calibrate(model, x, rng)
  with torch.no_grad():
    taps = model(x)

  weights = []
  for key, value in model.state_dict().items():
    if key.endswith("num_batches_tracked"):
      continue
    weights.append((slot_name(key), value.detach().numpy().astype(np.float32)))

  slots = {}
  for line in args.manifest.read_text().splitlines():
    if line and not line.startswith("#"):
      name, dims, _ = line.split()
      slots[name] = tuple(int(d) for d in dims.split("x"))
  exported = {n: tuple(a.shape) for n, a in weights}
  if exported != slots:
    missing = sorted(set(slots) - set(exported))
    extra = sorted(set(exported) - set(slots))
    bad = sorted(n for n in set(slots) & set(exported) if slots[n] != exported[n])
    raise SystemExit("manifest mismatch: missing %s extra %s dims %s" % (missing, extra, bad))

  args.out.mkdir(parents=True, exist_ok=True)
  (args.out / "weights.lfdw").write_bytes(encode_lfdw(weights))
  tap_entries = [(name, taps[name].detach().numpy()) for name in TAPS]
  (args.out / "taps.lfdw").write_bytes(encode_lfdw(tap_entries))
  Image.fromarray(rgb, "RGB").save(args.out / "image.png")
  meta = {
      "format": 1,
      "variant": "full",
      "input_hw": [HEIGHT, WIDTH],
      "csb_ratio": list(CSB_RATIO),
      "tolerance": TOLERANCE,
      "seed": args.seed,
      "generator": "scripts/gen_fixtures.py (torch %s)" % torch.__version__,
      "taps": TAPS,
  }
  (args.out / "fixture.json").write_text(json.dumps(meta, indent=2) + "\n")

  back = decode_lfdw((args.out / "taps.lfdw").read_bytes())
  for name, array in tap_entries:
    assert np.array_equal(back[name], array)
    print("%-16s %-18s max|x| %8.4f" % (name, "x".join(map(str, array.shape)),
                                        float(np.abs(array).max())))


if __name__ == "__main__":
  main()
