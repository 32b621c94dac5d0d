#!/usr/bin/env python3
# Copyright 2026 The cimcall Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Train the toy basecaller checked in under fixtures/toy.

Training data comes from `cimcall synth` with the fixture pore model at
several signal-noise levels. The network emits CRF transition scores
([S=4][D=5] per frame: decision 0 is Stay, 1 + b moves to base b) and is
trained on the negative log-likelihood of the true path, which is known
exactly because the synthesizer records the first sample of every base:
the move into base n happens in the frame containing its first sample.

Training runs in two phases. The float phase trains as usual. The
hardware-aware phase then perturbs every crossbar matrix with Gaussian
noise proportional to its largest weight on each forward pass and clips
weights to a few standard deviations after each step, so the network keeps
working once programmed onto noisy conductances whose scale is set by the
largest weight.

    python3 tools/train_toy.py --cimcall build/cimcall --out fixtures/toy

Not part of the test path; needs torch (CPU is fine, a few minutes).
"""

import argparse
import json
import math
import os
import struct
import subprocess
import tempfile

import numpy as np
import torch
from torch import nn

BASES = "ACGT"
SPF = 5
N_STATES = 4
N_DEC = 5


def read_cmrw(path):
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != b"CMRW":
        raise ValueError(f"{path}: not a raw read file")
    version, count = struct.unpack_from("<II", data, 4)
    if version != 1:
        raise ValueError(f"{path}: unsupported version {version}")
    off = 12
    reads = []
    for _ in range(count):
        _channel, n = struct.unpack_from("<II", data, off)
        off += 8
        reads.append(np.frombuffer(data, dtype="<f4", count=n, offset=off).astype(np.float32))
        off += 4 * n
    return reads


def synth(cimcall, pore, noise, n_reads, bases, seed, workdir):
    model = dict(pore)
    model["level_noise"] = noise
    model_path = os.path.join(workdir, f"pore_{seed}.json")
    with open(model_path, "w") as f:
        json.dump(model, f)
    out = os.path.join(workdir, f"synth_{seed}")
    subprocess.run(
        [cimcall, "synth", "--pore-model", model_path, "--reads", str(n_reads), "--read-bases", str(bases),
         "--seed", str(seed), "--out-dir", out],
        check=True, stdout=subprocess.DEVNULL)
    samples = read_cmrw(os.path.join(out, "reads.cmrw"))
    truth = [json.loads(line) for line in open(os.path.join(out, "truth.jsonl"))]
    return samples, truth


def chunk_examples(samples, truth, chunk, stride):
    """Zero-padded chunks with their true per-frame transitions.

    Chunk starts follow the library's plan (0, stride, ... until the read
    is covered). Returns signals [N, chunk], initial states [N] and
    per-frame decisions [N, T] (0 = stay, 1 + b = move to b)."""
    frames = chunk // SPF
    xs, inits, decs = [], [], []
    for sig, t in zip(samples, truth):
        seq = [BASES.index(c) for c in t["sequence"]]
        starts = np.asarray(t["base_starts"])
        s = 0
        while True:
            x = np.zeros(chunk, dtype=np.float32)
            valid = min(chunk, len(sig) - s)
            x[:valid] = sig[s:s + valid]
            current = int(np.searchsorted(starts, s, side="right")) - 1
            d = np.zeros(frames, dtype=np.int64)
            for n in range(current + 1, len(seq)):
                if starts[n] >= s + valid:
                    break
                d[(starts[n] - s) // SPF] = 1 + seq[n]
            xs.append(x)
            inits.append(seq[current])
            decs.append(d)
            if s + chunk >= len(sig):
                break
            s += stride
    return torch.tensor(np.stack(xs)), torch.tensor(inits), torch.tensor(np.stack(decs))


class ToyNet(nn.Module):
    def __init__(self, conv=(8, 16, 32), hidden=48, n_lstm=3):
        super().__init__()
        c1, c2, c3 = conv
        self.convs = nn.ModuleList([
            nn.Conv1d(1, c1, 5, stride=1, padding=2),
            nn.Conv1d(c1, c2, 5, stride=1, padding=2),
            nn.Conv1d(c2, c3, 19, stride=SPF, padding=9),
        ])
        self.lstms = nn.ModuleList()
        self.reverse = []
        size = c3
        for i in range(n_lstm):
            self.lstms.append(nn.LSTM(size, hidden, batch_first=True))
            self.reverse.append(i % 2 == 0)
            size = hidden
        self.fc = nn.Linear(hidden, N_STATES * N_DEC)

    def forward(self, x):
        y = x.unsqueeze(1)
        for conv in self.convs:
            y = nn.functional.silu(conv(y))
        y = y.transpose(1, 2)
        for lstm, rev in zip(self.lstms, self.reverse):
            if rev:
                y = torch.flip(lstm(torch.flip(y, [1]))[0], [1])
            else:
                y = lstm(y)[0]
        y = torch.clamp(self.fc(y), -5.0, 5.0)
        return y.view(y.shape[0], y.shape[1], N_STATES, N_DEC)


def destinations():
    dst = torch.zeros(N_STATES, N_DEC, dtype=torch.long)
    for s in range(N_STATES):
        dst[s, 0] = s
        for b in range(4):
            dst[s, 1 + b] = b
    return dst


DST = destinations()


def log_partition(scores):
    """log Z over all paths from a uniform initial state. scores [B, T, S, D]."""
    B, T = scores.shape[:2]
    alpha = scores.new_zeros(B, N_STATES)
    onehot = nn.functional.one_hot(DST.view(-1), N_STATES).to(scores.dtype)  # [S*D, S]
    mask = torch.log(onehot)  # 0 where the transition lands, -inf elsewhere
    for t in range(T):
        cand = (alpha.unsqueeze(2) + scores[:, t]).view(B, -1, 1) + mask.unsqueeze(0)  # [B, S*D, S]
        alpha = torch.logsumexp(cand, dim=1)
    return torch.logsumexp(alpha, dim=1)


def path_score(scores, init, decs):
    B, T = decs.shape
    state = init.clone()
    total = scores.new_zeros(B)
    idx = torch.arange(B)
    for t in range(T):
        d = decs[:, t]
        total = total + scores[idx, t, state, d]
        state = torch.where(d == 0, state, d - 1)
    return total


@torch.no_grad()
def viterbi(scores):
    """Best path per chunk; returns (initial state, decisions [B, T])."""
    B, T = scores.shape[:2]
    delta = scores.new_zeros(B, N_STATES)
    back = []
    for t in range(T):
        cand = delta.unsqueeze(2) + scores[:, t]  # [B, S, D]
        flat = cand.view(B, -1)
        new = scores.new_full((B, N_STATES), -math.inf)
        arg = torch.zeros(B, N_STATES, dtype=torch.long)
        for sd in range(N_STATES * N_DEC):
            dst = int(DST.view(-1)[sd])
            better = flat[:, sd] > new[:, dst]
            new[:, dst] = torch.where(better, flat[:, sd], new[:, dst])
            arg[:, dst] = torch.where(better, torch.full_like(arg[:, dst], sd), arg[:, dst])
        delta = new
        back.append(arg)
    state = delta.argmax(1)
    decs = torch.zeros(B, T, dtype=torch.long)
    for t in range(T - 1, -1, -1):
        sd = back[t][torch.arange(B), state]
        decs[:, t] = sd % N_DEC
        state = sd // N_DEC
    return state, decs


def crossbar_groups(net):
    """Parameter names that share one conductance scale on the crossbars."""
    groups = [[f"convs.{i}.weight"] for i in range(len(net.convs))]
    groups += [[f"lstms.{i}.weight_ih_l0", f"lstms.{i}.weight_hh_l0"] for i in range(len(net.lstms))]
    groups.append(["fc.weight"])
    return groups


def noisy_forward(net, x, rel_sigma):
    """Forward pass with per-matrix weight noise of rel_sigma * max|w|."""
    params = dict(net.named_parameters())
    for group in crossbar_groups(net):
        w_max = max(params[n].detach().abs().max() for n in group)
        for n in group:
            params[n] = params[n] + torch.randn_like(params[n]) * (rel_sigma * w_max)
    return torch.func.functional_call(net, params, (x,))


@torch.no_grad()
def clip_weights(net, n_sigma):
    params = dict(net.named_parameters())
    for group in crossbar_groups(net):
        flat = torch.cat([params[n].view(-1) for n in group])
        bound = n_sigma * flat.std()
        for n in group:
            params[n].clamp_(-bound, bound)


def load(net, path):
    """Loads weights written by export()."""
    manifest = json.load(open(path))
    blob = np.fromfile(os.path.join(os.path.dirname(path), manifest["weights_file"]), dtype="<f4")
    compute = [l for l in manifest["layers"] if l["kind"] in ("conv1d", "lstm", "fc")]

    def take(spec):
        off, n = spec
        return torch.tensor(blob[off:off + n])

    with torch.no_grad():
        for conv, l in zip(net.convs, compute[:3]):
            conv.weight.copy_(take(l["weights"]).view_as(conv.weight))
            conv.bias.copy_(take(l["bias"]))
        for lstm, l in zip(net.lstms, compute[3:-1]):
            w = take(l["weights"]).view(4 * lstm.hidden_size, -1)
            lstm.weight_ih_l0.copy_(w[:, :lstm.input_size])
            lstm.weight_hh_l0.copy_(w[:, lstm.input_size:])
            lstm.bias_ih_l0.copy_(take(l["bias"]))
            lstm.bias_hh_l0.zero_()
        net.fc.weight.copy_(take(compute[-1]["weights"]).view_as(net.fc.weight))
        net.fc.bias.copy_(take(compute[-1]["bias"]))


def export(net, path):
    layers, blob = [], []

    def add(geom, weights=None, bias=None):
        w = [] if weights is None else weights.detach().cpu().numpy().astype(np.float32).ravel().tolist()
        b = [] if bias is None else bias.detach().cpu().numpy().astype(np.float32).ravel().tolist()
        geom = dict(geom)
        geom["weights"] = [len(blob), len(w)]
        blob.extend(w)
        geom["bias"] = [len(blob), len(b)]
        blob.extend(b)
        layers.append(geom)

    for conv in net.convs:
        add({"kind": "conv1d", "in_channels": conv.in_channels, "out_channels": conv.out_channels,
             "kernel_width": conv.kernel_size[0], "stride": conv.stride[0], "padding": conv.padding[0],
             "has_bias": True}, conv.weight, conv.bias)
        add({"kind": "swish"})
    for lstm, rev in zip(net.lstms, net.reverse):
        w = torch.cat([lstm.weight_ih_l0, lstm.weight_hh_l0], dim=1)
        add({"kind": "lstm", "input_size": lstm.input_size, "hidden_size": lstm.hidden_size, "reverse": rev}, w,
            lstm.bias_ih_l0 + lstm.bias_hh_l0)
    add({"kind": "fc", "in_features": net.fc.in_features, "out_features": net.fc.out_features}, net.fc.weight,
        net.fc.bias)
    add({"kind": "clamp", "lo": -5.0, "hi": 5.0})

    bin_path = os.path.splitext(path)[0] + ".bin"
    manifest = {"format": "cimcall-weights", "version": 1, "name": "toy", "input_channels": 1,
                "weights_file": os.path.basename(bin_path), "layers": layers}
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    np.asarray(blob, dtype="<f4").tofile(bin_path)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--cimcall", default="build/cimcall")
    ap.add_argument("--out", default="fixtures/toy")
    ap.add_argument("--reads", type=int, default=600, help="reads per noise level")
    ap.add_argument("--read-bases", type=int, default=400)
    ap.add_argument("--noise", default="0,0.05,0.1,0.15")
    ap.add_argument("--steps", type=int, default=4000)
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--lr", type=float, default=3e-3)
    ap.add_argument("--hidden", type=int, default=48)
    ap.add_argument("--chunk", type=int, default=500)
    ap.add_argument("--overlap", type=int, default=100)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--init", help="start from an exported network.json")
    ap.add_argument("--hw-steps", type=int, default=3000, help="hardware-aware steps after the float phase")
    ap.add_argument("--hw-lr", type=float, default=1e-3)
    ap.add_argument("--weight-noise", type=float, default=0.05, help="noise std relative to max|w| per matrix")
    ap.add_argument("--clip-sigma", type=float, default=2.5)
    args = ap.parse_args()

    torch.manual_seed(args.seed)
    rng = np.random.default_rng(args.seed)
    pore = json.load(open(os.path.join(args.out, "pore_model.json")))
    stride = args.chunk - args.overlap

    with tempfile.TemporaryDirectory() as tmp:
        parts = []
        for i, noise in enumerate(float(v) for v in args.noise.split(",")):
            s, t = synth(args.cimcall, pore, noise, args.reads, args.read_bases, 1000 + i, tmp)
            parts.append(chunk_examples(s, t, args.chunk, stride))
        vs, vt = synth(args.cimcall, pore, 0.0, 40, args.read_bases, 999, tmp)
        val = chunk_examples(vs, vt, args.chunk, stride)
    x = torch.cat([p[0] for p in parts])
    init = torch.cat([p[1] for p in parts])
    decs = torch.cat([p[2] for p in parts])
    print(f"training chunks: {len(x)}, validation chunks: {len(val[0])}", flush=True)

    net = ToyNet(hidden=args.hidden)
    if args.init:
        load(net, args.init)

    def evaluate(step, loss, rel_sigma):
        with torch.no_grad():
            vscores = noisy_forward(net, val[0], rel_sigma) if rel_sigma > 0 else net(val[0])
            _, vdec = viterbi(vscores)
            frame_err = (vdec != val[2]).float().mean().item()
            exact = (vdec == val[2]).all(1).float().mean().item()
        tag = f"weight noise {rel_sigma:g}" if rel_sigma > 0 else "noise-free"
        print(f"step {step} loss {loss:.4f} {tag} frame error {frame_err:.5f} exact chunks {exact:.4f}", flush=True)

    def train(steps, lr, rel_sigma):
        opt = torch.optim.Adam(net.parameters(), lr=lr)
        sched = torch.optim.lr_scheduler.OneCycleLR(opt, max_lr=lr, total_steps=steps, pct_start=0.1)
        for step in range(1, steps + 1):
            idx = torch.as_tensor(rng.integers(0, len(x), args.batch))
            scores = noisy_forward(net, x[idx], rel_sigma) if rel_sigma > 0 else net(x[idx])
            loss = (log_partition(scores) - path_score(scores, init[idx], decs[idx])).mean() / scores.shape[1]
            opt.zero_grad()
            loss.backward()
            nn.utils.clip_grad_norm_(net.parameters(), 1.0)
            opt.step()
            sched.step()
            if rel_sigma > 0:
                clip_weights(net, args.clip_sigma)
            if step % 250 == 0 or step == steps:
                evaluate(step, loss.item(), 0.0)
                if rel_sigma > 0:
                    evaluate(step, loss.item(), rel_sigma)

    if args.init:
        evaluate(0, float("nan"), 0.0)
        evaluate(0, float("nan"), args.weight_noise)
    if args.steps > 0:
        print("float phase", flush=True)
        train(args.steps, args.lr, 0.0)
        export(net, os.path.join(args.out, "network_float.json"))
    if args.hw_steps > 0:
        print("hardware-aware phase", flush=True)
        clip_weights(net, args.clip_sigma)
        train(args.hw_steps, args.hw_lr, args.weight_noise)

    export(net, os.path.join(args.out, "network.json"))
    print("wrote", os.path.join(args.out, "network.json"))


if __name__ == "__main__":
    main()
