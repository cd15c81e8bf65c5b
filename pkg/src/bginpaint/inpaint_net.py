"""Center-hole inpainting network: encoder-decoder generator + adversary.

The generator maps a masked patch (hole zeroed) to the hole content at
half the patch side. Training alternates a discriminator step on the
log-likelihood objective with a generator step on the weighted sum of
reconstruction and adversarial terms; the generator uses the
non-saturating form of the adversarial term for stability while the
recorded adversarial value is the discriminator objective as defined.

All randomness flows through explicit seeds so identical seeds and data
give identical parameters and loss histories.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from .errors import (
    ArchMismatch,
    DimensionMismatch,
    DivergedLoss,
    EmptyTrainingSet,
    IoFailure,
)
from .masking import InpaintTask, hole_box

CHECKPOINT_FORMAT = "dcp-ckpt-v1"

_PROB_EPS = 1e-7


@dataclass(frozen=True)
class ArchDescriptor:
    """Shape of the generator/discriminator pair.

    The encoder applies one stride-2 convolution per entry of
    ``enc_channels``; the decoder mirrors all but the last, so the
    output side is always half the input side when the input side is
    divisible by 2**len(enc_channels).
    """

    patch_size: int = 128
    channels: int = 3
    enc_channels: tuple[int, ...] = (32, 64, 128, 256)
    latent: int = 1024
    disc_channels: tuple[int, ...] = (32, 64, 128)


@dataclass(frozen=True)
class TrainConfig:
    eta: float = 0.999
    epochs: int = 3
    batch_size: int = 8
    lr_gen: float = 2e-4
    lr_disc: float = 2e-4
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta {self.eta} outside [0, 1]")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


class Generator(nn.Module):
    def __init__(self, arch: ArchDescriptor, dtype: torch.dtype = torch.float32):
        super().__init__()
        self.arch = arch
        enc = []
        cin = arch.channels
        for cout in arch.enc_channels:
            enc += [nn.Conv2d(cin, cout, 4, stride=2, padding=1), nn.LeakyReLU(0.2)]
            cin = cout
        enc += [nn.Conv2d(cin, arch.latent, 1), nn.LeakyReLU(0.2)]
        self.encoder = nn.Sequential(*enc)
        dec = []
        cin = arch.latent
        for cout in reversed(arch.enc_channels[:-1]):
            dec += [nn.ConvTranspose2d(cin, cout, 4, stride=2, padding=1), nn.ReLU()]
            cin = cout
        dec += [nn.Conv2d(cin, arch.channels, 3, padding=1), nn.Sigmoid()]
        self.decoder = nn.Sequential(*dec)
        self.to(dtype)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.decoder(self.encoder(x))


class Discriminator(nn.Module):
    """Convolutional classifier over hole-sized images, output in (0, 1)."""

    def __init__(self, arch: ArchDescriptor, dtype: torch.dtype = torch.float32):
        super().__init__()
        self.arch = arch
        layers = []
        cin = arch.channels
        for cout in arch.disc_channels:
            layers += [nn.Conv2d(cin, cout, 4, stride=2, padding=1), nn.LeakyReLU(0.2)]
            cin = cout
        layers += [nn.AdaptiveAvgPool2d(1), nn.Flatten(), nn.Linear(cin, 1), nn.Sigmoid()]
        self.net = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        # clamp keeps the output strictly inside (0, 1) even in float32
        return self.net(x).squeeze(1).clamp(_PROB_EPS, 1.0 - _PROB_EPS)


def _seed_parameters(module: nn.Module, gen: torch.Generator) -> None:
    for name, p in module.named_parameters():
        with torch.no_grad():
            if p.ndim > 1:
                p.copy_(torch.randn(p.shape, generator=gen, dtype=torch.float64).to(p.dtype) * 0.02)
            else:
                p.zero_()


def init_network(
    arch: ArchDescriptor, seed: int, dtype: torch.dtype = torch.float32
) -> tuple[Generator, Discriminator]:
    """Build and deterministically initialize both networks.

    Raises ArchMismatch when the descriptor cannot produce a hole-sized
    (half-side) output for its patch size.
    """
    stride_total = 2 ** len(arch.enc_channels)
    if arch.patch_size % stride_total != 0 or arch.patch_size < 2 * stride_total:
        raise ArchMismatch(
            f"patch size {arch.patch_size} incompatible with {len(arch.enc_channels)} stride-2 layers"
        )
    gen = Generator(arch, dtype=dtype)
    disc = Discriminator(arch, dtype=dtype)
    disc.to(dtype)
    g = torch.Generator().manual_seed(seed)
    _seed_parameters(gen, g)
    _seed_parameters(disc, g)
    with torch.no_grad():
        probe = gen(torch.zeros(1, arch.channels, arch.patch_size, arch.patch_size, dtype=dtype))
    want = arch.patch_size // 2
    if probe.shape[-2:] != (want, want):
        raise ArchMismatch(f"generator yields side {probe.shape[-1]}, expected {want}")
    gen.eval()
    disc.eval()
    return gen, disc


def _to_tensor(img: np.ndarray, dtype: torch.dtype) -> torch.Tensor:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return torch.from_numpy(arr.transpose(2, 0, 1)[None]).to(dtype)


def _to_image(t: torch.Tensor) -> np.ndarray:
    arr = t.detach().numpy()[0].transpose(1, 2, 0).astype(np.float64)
    return arr[:, :, 0] if arr.shape[2] == 1 else arr


def generator_forward(gen: Generator, masked: np.ndarray) -> np.ndarray:
    """Predict hole content (side = input side / 2, values in [0, 1])."""
    if masked.shape[:2] != (gen.arch.patch_size, gen.arch.patch_size):
        raise DimensionMismatch(
            f"masked patch side {masked.shape[:2]} != arch patch size {gen.arch.patch_size}"
        )
    dtype = next(gen.parameters()).dtype
    with torch.no_grad():
        out = gen(_to_tensor(masked, dtype))
    return _to_image(out)


def inpaint_center(gen: Generator, task: InpaintTask) -> np.ndarray:
    """Full patch with the hole replaced by the generator prediction."""
    if task.patch_size != gen.arch.patch_size:
        raise DimensionMismatch(
            f"task patch side {task.patch_size} != arch patch size {gen.arch.patch_size}"
        )
    pred = generator_forward(gen, task.masked_patch())
    out = task.patch.copy()
    r0, c0, side = task.hole
    out[r0 : r0 + side, c0 : c0 + side] = pred
    return out


def reconstruction_loss(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mean squared difference over all hole elements."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise DimensionMismatch(f"hole shapes differ: {pred.shape} vs {truth.shape}")
    return float(np.mean((pred - truth) ** 2))


def adversarial_value(d_real: np.ndarray, d_fake: np.ndarray) -> float:
    """log D(real) + log(1 - D(fake)), averaged over the batch."""
    pr = np.clip(np.asarray(d_real, dtype=np.float64), _PROB_EPS, 1.0 - _PROB_EPS)
    pf = np.clip(np.asarray(d_fake, dtype=np.float64), _PROB_EPS, 1.0 - _PROB_EPS)
    return float(np.mean(np.log(pr) + np.log(1.0 - pf)))


def adversarial_loss(disc: Discriminator, real: np.ndarray, fake: np.ndarray) -> float:
    """Discriminator objective on one real/fake hole pair (or batch)."""
    dtype = next(disc.parameters()).dtype
    with torch.no_grad():
        pr = disc(_batch_tensor(real, dtype)).numpy()
        pf = disc(_batch_tensor(fake, dtype)).numpy()
    return adversarial_value(pr, pf)


def _batch_tensor(imgs: np.ndarray, dtype: torch.dtype) -> torch.Tensor:
    arr = np.asarray(imgs, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None, :, :, None]
    elif arr.ndim == 3 and arr.shape[-1] in (1, 3):
        arr = arr[None]
    elif arr.ndim == 3:
        arr = arr[:, :, :, None]
    return torch.from_numpy(arr.transpose(0, 3, 1, 2)).to(dtype)


def joint_loss(l_rec: float, l_adv: float, eta: float) -> float:
    """eta * reconstruction + (1 - eta) * adversarial."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta {eta} outside [0, 1]")
    return eta * l_rec + (1.0 - eta) * l_adv


def joint_loss_tensor(
    gen: Generator,
    disc: Discriminator,
    masked: torch.Tensor,
    truth: torch.Tensor,
    eta: float,
) -> torch.Tensor:
    """Joint loss as a differentiable scalar, adversarial term as defined.

    Used by the finite-difference gradient checks; training itself uses
    the non-saturating generator variant.
    """
    fake = gen(masked)
    l_rec = ((fake - truth) ** 2).mean()
    l_adv = (torch.log(disc(truth)) + torch.log(1.0 - disc(fake))).mean()
    return eta * l_rec + (1.0 - eta) * l_adv


def _task_arrays(tasks: list[InpaintTask], dtype: torch.dtype):
    xs = torch.cat([_to_tensor(t.masked_patch(), dtype) for t in tasks])
    ys = torch.cat([_to_tensor(t.hole_content(), dtype) for t in tasks])
    return xs, ys


def train(
    tasks: list[InpaintTask],
    cfg: TrainConfig,
    arch: ArchDescriptor,
    nets: tuple[Generator, Discriminator] | None = None,
) -> tuple[Generator, Discriminator, list[dict]]:
    """Alternating adversarial training on background-pure patches.

    Every task's patch must carry true hole content (its own center).
    Returns the trained pair and a per-generator-step loss history with
    keys step, l_rec, l_adv, loss.
    """
    if not tasks:
        raise EmptyTrainingSet("no training patches with known hole content")
    for t in tasks:
        if t.patch_size != arch.patch_size:
            raise DimensionMismatch(
                f"task patch side {t.patch_size} != arch patch size {arch.patch_size}"
            )
    gen, disc = nets if nets is not None else init_network(arch, cfg.seed)
    dtype = next(gen.parameters()).dtype
    xs, ys = _task_arrays(tasks, dtype)
    n = xs.shape[0]
    opt_g = torch.optim.Adam(gen.parameters(), lr=cfg.lr_gen, betas=(0.5, 0.999))
    opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.lr_disc, betas=(0.5, 0.999))
    rng = np.random.default_rng(cfg.seed)

    gen.train()
    disc.train()
    history: list[dict] = []
    step = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = torch.from_numpy(order[start : start + cfg.batch_size].copy())
            xb, yb = xs[idx], ys[idx]

            # discriminator ascends log D(real) + log(1 - D(fake))
            with torch.no_grad():
                fake_detached = gen(xb)
            d_real = disc(yb)
            d_fake = disc(fake_detached)
            l_adv = (torch.log(d_real) + torch.log(1.0 - d_fake)).mean()
            opt_d.zero_grad()
            (-l_adv).backward()
            opt_d.step()

            # generator: reconstruction plus non-saturating adversarial term
            fake = gen(xb)
            l_rec = ((fake - yb) ** 2).mean()
            if cfg.eta < 1.0:
                adv_g = torch.log(disc(fake)).mean()
                loss_g = cfg.eta * l_rec - (1.0 - cfg.eta) * adv_g
            else:
                loss_g = l_rec
            opt_g.zero_grad()
            loss_g.backward()
            opt_g.step()

            rec = float(l_rec.detach())
            adv = float(l_adv.detach())
            if not (np.isfinite(rec) and np.isfinite(adv)):
                raise DivergedLoss(f"non-finite loss at step {step}")
            history.append(
                {"step": step, "l_rec": rec, "l_adv": adv, "loss": joint_loss(rec, adv, cfg.eta)}
            )
            step += 1
    gen.eval()
    disc.eval()
    return gen, disc, history


def save_checkpoint(
    path, gen: Generator, disc: Discriminator, arch: ArchDescriptor, seed: int
) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "arch": asdict(arch),
        "seed": int(seed),
        "generator": gen.state_dict(),
        "discriminator": disc.state_dict(),
    }
    try:
        torch.save(payload, path)
    except OSError as exc:
        raise IoFailure(f"cannot write checkpoint {path}: {exc}") from exc


def load_checkpoint(path, dtype: torch.dtype = torch.float32):
    """Returns (generator, discriminator, arch, seed)."""
    try:
        payload = torch.load(path, weights_only=True)
    except OSError as exc:
        raise IoFailure(f"cannot read checkpoint {path}: {exc}") from exc
    except Exception as exc:
        raise IoFailure(f"not a readable checkpoint: {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise IoFailure(f"{path} is not a {CHECKPOINT_FORMAT} checkpoint")
    arch_dict = dict(payload["arch"])
    arch_dict["enc_channels"] = tuple(arch_dict["enc_channels"])
    arch_dict["disc_channels"] = tuple(arch_dict["disc_channels"])
    arch = ArchDescriptor(**arch_dict)
    gen = Generator(arch, dtype=dtype)
    disc = Discriminator(arch, dtype=dtype)
    disc.to(dtype)
    gen.load_state_dict(payload["generator"])
    disc.load_state_dict(payload["discriminator"])
    gen.eval()
    disc.eval()
    return gen, disc, arch, int(payload["seed"])
