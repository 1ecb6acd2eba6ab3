"""
Citrinet encoder and CTC head.

Layout: a prolog separable convolution, three mega-blocks of residual blocks
(6, 7 and 8 blocks) whose first block halves the frame rate, an epilog separable
convolution and a pointwise projection to ``vocab_size + 1`` classes. The blank
class is the last one.

Each residual block has ``repeat`` sub-blocks of depthwise conv, pointwise conv
and batch norm. ReLU and dropout follow every sub-block except the last, whose
output is gated by squeeze-and-excitation, added to a pointwise-conv + BN skip
of the block input, and only then passed through ReLU and dropout.
"""

import math
from dataclasses import dataclass
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveInt, field_validator

try:
    from utils.tensor_core import (
        Parameter,
        Tensor,
        add,
        apply_mask,
        batchnorm1d,
        conv1d,
        conv_output_length,
        dropout,
        linear,
        log_softmax,
        mul,
        reduce_mean_time,
        relu,
        repeat_time,
        sigmoid,
    )
    from utils.frontend import N_MELS
except ImportError:
    from src.utils.tensor_core import (
        Parameter,
        Tensor,
        add,
        apply_mask,
        batchnorm1d,
        conv1d,
        conv_output_length,
        dropout,
        linear,
        log_softmax,
        mul,
        reduce_mean_time,
        relu,
        repeat_time,
        sigmoid,
    )
    from src.utils.frontend import N_MELS


MEGABLOCK_SIZES = (6, 7, 8)
CONTRACTION = 8


class KernelLayout(BaseModel):
    """Depthwise kernel widths for blocks B0 (prolog) to B22 (epilog)."""

    model_config = ConfigDict(frozen=True)

    prolog: int = 5
    megablock1: tuple[int, ...]
    megablock2: tuple[int, ...]
    megablock3: tuple[int, ...]
    epilog: int = 41

    @field_validator("prolog", "epilog")
    @classmethod
    def _odd_width(cls, value):
        if value < 1 or value % 2 == 0:
            raise ValueError(f"kernel width must be odd and >= 1, got {value}")
        return value

    @field_validator("megablock1", "megablock2", "megablock3")
    @classmethod
    def _odd_widths(cls, value, info):
        expected = MEGABLOCK_SIZES[int(info.field_name[-1]) - 1]
        if len(value) != expected:
            raise ValueError(f"{info.field_name} needs {expected} kernel widths, got {len(value)}")
        for width in value:
            if width < 1 or width % 2 == 0:
                raise ValueError(f"{info.field_name} kernel widths must be odd and >= 1, got {width}")
        return tuple(value)

    @property
    def megablocks(self):
        return (self.megablock1, self.megablock2, self.megablock3)


K4 = KernelLayout(
    prolog=5,
    megablock1=(11, 13, 15, 17, 19, 21),
    megablock2=(13, 15, 17, 19, 21, 23, 25),
    megablock3=(25, 27, 29, 31, 33, 35, 37, 39),
    epilog=41,
)


def scale_kernel(width, gamma):
    scaled = math.floor(width * gamma)
    return scaled + 1 if scaled % 2 == 0 else scaled


def scale_kernel_layout(base=K4, gamma=1.0):
    """Scale every residual-block kernel by ``gamma``; prolog and epilog are kept."""
    if gamma <= 0:
        raise ValueError(f"kernel scale gamma must be > 0, got {gamma}")
    return KernelLayout(
        prolog=base.prolog,
        megablock1=[scale_kernel(width, gamma) for width in base.megablock1],
        megablock2=[scale_kernel(width, gamma) for width in base.megablock2],
        megablock3=[scale_kernel(width, gamma) for width in base.megablock3],
        epilog=base.epilog,
    )


class CitrinetConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    repeat: PositiveInt = 5
    channels: PositiveInt = 384
    layout: KernelLayout = K4
    gamma: Optional[float] = Field(default=None, gt=0)
    se_window: Union[Literal["global"], PositiveInt] = "global"
    se_reduction: PositiveInt = 8
    se_enabled: bool = True
    epilog_channels: PositiveInt = 640
    vocab_size: PositiveInt = 256
    dropout_p: float = Field(default=0.1, ge=0.0, lt=1.0)
    feat_in: PositiveInt = N_MELS

    @property
    def effective_layout(self):
        if self.gamma is None:
            return self.layout
        return scale_kernel_layout(self.layout, self.gamma)

    @property
    def num_classes(self):
        return self.vocab_size + 1

    @property
    def se_hidden(self):
        return max(1, self.channels // self.se_reduction)


def encoder_output_length(frames):
    length = int(frames)
    for _ in range(3):
        length = conv_output_length(length, 2)
    return length


def frame_mask(lengths, frames, dtype=np.float32):
    lengths = np.asarray(lengths)
    return (np.arange(frames)[None, None, :] < lengths[:, None, None]).astype(dtype)


@dataclass
class LogProbMatrix:
    """Per-frame log-probabilities ``[frames, vocab_size + 1]``; blank is last."""

    values: np.ndarray

    @property
    def frames(self):
        return int(self.values.shape[0])

    @property
    def num_classes(self):
        return int(self.values.shape[1])

    @property
    def blank(self):
        return self.num_classes - 1


class ParameterFactory:
    """Creates named parameters and guards name uniqueness.

    With ``initialize=False`` tensors are lazily zeroed and carry no gradient
    buffers, which is enough to count parameters of very large configs.
    """

    def __init__(self, rng=None, dtype=np.float32, initialize=True):
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.dtype = dtype
        self.initialize = initialize
        self.parameters = []
        self._names = set()

    def _register(self, name, data, decay):
        if name in self._names:
            raise ValueError(f"Duplicate parameter name: {name}")
        self._names.add(name)
        param = Parameter(name, Tensor(data, requires_grad=self.initialize, dtype=self.dtype), decay)
        self.parameters.append(param)
        return param.tensor

    def uniform(self, name, shape, fan_in, decay=True):
        if not self.initialize:
            return self._register(name, np.zeros(shape, dtype=self.dtype), decay)
        bound = 1.0 / math.sqrt(fan_in)
        return self._register(name, self.rng.uniform(-bound, bound, size=shape), decay)

    def constant(self, name, shape, value, decay=False):
        if not self.initialize:
            return self._register(name, np.zeros(shape, dtype=self.dtype), decay)
        return self._register(name, np.full(shape, value, dtype=self.dtype), decay)


class BatchNorm:
    def __init__(self, factory, name, channels):
        self.name = name
        self.weight = factory.constant(f"{name}.weight", (channels,), 1.0)
        self.bias = factory.constant(f"{name}.bias", (channels,), 0.0)
        self.running_mean = np.zeros(channels, dtype=np.float64)
        self.running_var = np.ones(channels, dtype=np.float64)

    def buffers(self):
        return {
            f"{self.name}.running_mean": self.running_mean,
            f"{self.name}.running_var": self.running_var,
        }

    def __call__(self, x, training, mask=None):
        return batchnorm1d(x, self.weight, self.bias, self.running_mean, self.running_var, training, mask=mask)


class SeparableConv:
    """Depthwise conv over time followed by a pointwise channel mix."""

    def __init__(self, factory, name, c_in, c_out, kernel, stride=1):
        self.kernel = kernel
        self.stride = stride
        self.c_in = c_in
        self.depthwise = factory.uniform(f"{name}.depthwise.weight", (c_in, 1, kernel), fan_in=kernel)
        self.pointwise = factory.uniform(f"{name}.pointwise.weight", (c_out, c_in, 1), fan_in=c_in)

    def __call__(self, x):
        x = conv1d(x, self.depthwise, stride=self.stride, groups=self.c_in)
        return conv1d(x, self.pointwise)


class SqueezeExcite:
    """Channel gate ``sigmoid(W2 relu(W1 mean(x) + b1) + b2)`` applied per frame."""

    def __init__(self, factory, name, channels, hidden, window="global"):
        self.window = None if window == "global" else int(window)
        self.w1 = factory.uniform(f"{name}.w1", (hidden, channels), fan_in=channels)
        self.b1 = factory.constant(f"{name}.b1", (hidden,), 0.0)
        self.w2 = factory.uniform(f"{name}.w2", (channels, hidden), fan_in=hidden)
        self.b2 = factory.constant(f"{name}.b2", (channels,), 0.0)

    def gate(self, x, mask=None):
        pooled = reduce_mean_time(x, window=self.window, mask=mask)
        hidden = relu(linear(pooled, self.w1, self.b1))
        return sigmoid(linear(hidden, self.w2, self.b2))

    def __call__(self, x, mask=None):
        return se_forward(self, x, mask)


def se_forward(se, x, mask=None):
    gate = se.gate(x, mask)
    length = x.shape[-1]
    return mul(x, repeat_time(gate, se.window if se.window is not None else length, length))


class ResidualBlock:
    def __init__(self, factory, name, cfg, c_in, kernel, stride):
        channels = cfg.channels
        self.stride = stride
        self.subs = []
        for index in range(cfg.repeat):
            sub_in = c_in if index == 0 else channels
            sub_stride = stride if index == 0 else 1
            conv = SeparableConv(factory, f"{name}.sub{index}", sub_in, channels, kernel, sub_stride)
            self.subs.append((conv, BatchNorm(factory, f"{name}.sub{index}.bn", channels)))
        self.se = None
        if cfg.se_enabled:
            self.se = SqueezeExcite(factory, f"{name}.se", channels, cfg.se_hidden, cfg.se_window)
        self.skip = factory.uniform(f"{name}.skip.pointwise.weight", (channels, c_in, 1), fan_in=c_in)
        self.skip_bn = BatchNorm(factory, f"{name}.skip.bn", channels)

    def batchnorms(self):
        return [bn for _, bn in self.subs] + [self.skip_bn]

    def __call__(self, x, lengths, training, dropout_p, rng):
        in_mask = frame_mask(lengths, x.shape[-1], x.dtype)
        out_lengths = (lengths + self.stride - 1) // self.stride
        h = x
        mask = in_mask
        for index, (conv, bn) in enumerate(self.subs):
            h = conv(apply_mask(h, mask))
            mask = frame_mask(out_lengths, h.shape[-1], h.dtype)
            h = bn(h, training, mask)
            if index < len(self.subs) - 1:
                h = dropout(relu(h), dropout_p, training, rng)
        if self.se is not None:
            h = self.se(h, mask)
        skip = conv1d(apply_mask(x, in_mask), self.skip, stride=self.stride)
        skip = self.skip_bn(skip, training, mask)
        return dropout(relu(add(h, skip)), dropout_p, training, rng), out_lengths


class Citrinet:
    def __init__(self, cfg, rng=None, dtype=np.float32, initialize=True):
        self.cfg = cfg
        layout = cfg.effective_layout
        self.layout = layout
        factory = ParameterFactory(rng, dtype, initialize)
        channels = cfg.channels

        self.prolog = SeparableConv(factory, "prolog", cfg.feat_in, channels, layout.prolog)
        self.prolog_bn = BatchNorm(factory, "prolog.bn", channels)
        self.megablocks = []
        for m, kernels in enumerate(layout.megablocks, start=1):
            blocks = []
            for b, kernel in enumerate(kernels):
                stride = 2 if b == 0 else 1
                blocks.append(ResidualBlock(factory, f"megablock{m}.block{b}", cfg, channels, kernel, stride))
            self.megablocks.append(blocks)
        self.epilog = SeparableConv(factory, "epilog", channels, cfg.epilog_channels, layout.epilog)
        self.epilog_bn = BatchNorm(factory, "epilog.bn", cfg.epilog_channels)
        self.head_weight = factory.uniform(
            "head.weight", (cfg.num_classes, cfg.epilog_channels, 1), fan_in=cfg.epilog_channels
        )
        self.head_bias = factory.constant("head.bias", (cfg.num_classes,), 0.0)
        self.parameters = factory.parameters

    def named_parameters(self):
        return {param.name: param for param in self.parameters}

    def batchnorms(self):
        norms = [self.prolog_bn]
        for blocks in self.megablocks:
            for block in blocks:
                norms.extend(block.batchnorms())
        norms.append(self.epilog_bn)
        return norms

    def buffers(self):
        buffers = {}
        for bn in self.batchnorms():
            buffers.update(bn.buffers())
        return buffers

    def zero_grad(self):
        for param in self.parameters:
            param.tensor.zero_grad()

    def forward_batch(self, features, lengths, training=False, rng=None):
        """Run ``[B, feat_in, T]`` features with true ``lengths``.

        Returns log-probabilities ``[B, vocab_size + 1, T_out]`` and output lengths.
        """
        features = np.asarray(features)
        if features.ndim != 3 or features.shape[1] != self.cfg.feat_in:
            raise ValueError(f"Expected features [B, {self.cfg.feat_in}, T], got shape {features.shape}")
        if features.shape[2] == 0:
            raise ValueError("Cannot run the encoder on zero frames")
        lengths = np.asarray(lengths, dtype=np.int64)
        if lengths.shape != (features.shape[0],) or lengths.min() < 1 or lengths.max() > features.shape[2]:
            raise ValueError(f"Lengths {lengths.tolist()} do not match features of shape {features.shape}")
        p = self.cfg.dropout_p
        dtype = self.parameters[0].tensor.dtype

        x = Tensor(features.astype(dtype, copy=False))
        mask = frame_mask(lengths, x.shape[-1], dtype)
        x = self.prolog(apply_mask(x, mask))
        x = relu(self.prolog_bn(x, training, mask))
        for blocks in self.megablocks:
            for block in blocks:
                x, lengths = block(x, lengths, training, p, rng)
        mask = frame_mask(lengths, x.shape[-1], dtype)
        x = self.epilog(apply_mask(x, mask))
        x = dropout(relu(self.epilog_bn(x, training, mask)), p, training, rng)
        logits = conv1d(x, self.head_weight, self.head_bias)
        return log_softmax(logits, axis=1), lengths


def build_model(cfg, rng=None, dtype=np.float32):
    return Citrinet(cfg, rng=rng, dtype=dtype)


def forward(model, features, mode="eval", rng=None):
    """Run one FeatureMatrix and return its LogProbMatrix."""
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    values = features.values
    if values.shape[1] == 0:
        raise ValueError("Cannot run the encoder on zero frames")
    logp, lengths = model.forward_batch(values[None], [values.shape[1]], training=mode == "train", rng=rng)
    return LogProbMatrix(logp.data[0, :, :int(lengths[0])].T.astype(np.float64))


def count_parameters(model):
    """Trainable scalar count of a model or of a list of parameters."""
    parameters = getattr(model, "parameters", model)
    return sum(param.size for param in parameters)


def count_config_parameters(cfg):
    return count_parameters(Citrinet(cfg, initialize=False))


def parameter_breakdown(model):
    breakdown = {"prolog": 0, "megablock1": 0, "megablock2": 0, "megablock3": 0, "epilog": 0, "head": 0}
    for param in model.parameters:
        breakdown[param.name.split(".", 1)[0]] += param.size
    return breakdown


def receptive_field(model):
    """Input frames reaching one output frame through the convolution stack.

    SE pooling is not included; with SE enabled the effective context is the
    whole utterance (or the SE window).
    """
    layers = [(model.prolog.kernel, 1)]
    for blocks in model.megablocks:
        for block in blocks:
            layers.extend((conv.kernel, conv.stride) for conv, _ in block.subs)
    layers.append((model.epilog.kernel, 1))
    return compose_receptive_field(layers)


def compose_receptive_field(layers):
    """Receptive field of a chain of centered ``(kernel, stride)`` convolutions."""
    field_width = 1
    jump = 1
    for kernel, stride in layers:
        field_width += (kernel - 1) * jump
        jump *= stride
    return field_width
