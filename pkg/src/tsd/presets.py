"""Named configurations used by the CLI defaults and the acceptance suite."""

from __future__ import annotations

from tsd.model.config import TSDConfig
from tsd.train.loop import TrainSettings

# scaled-down architecture that trains on one CPU core in well under 20 minutes;
# float32 halves the step time, 4 heads and ffn 128 trim another fifth
DESK_CONFIG = TSDConfig(
    lookback=96,
    horizon=24,
    n_channels=1,
    d_model=128,
    n_heads=4,
    n_blocks=3,
    ffn_dim=128,
    base_channels=16,
    dropout=0.05,
    precision="float32",
)
DESK_SETTINGS = TrainSettings(learning_rate=1e-3, weight_decay=1e-4, scheduler_gamma=0.95, scheduler_step=2, epochs=15)

# small enough to memorise 32 sine windows in a few hundred steps
SINE_CONFIG = TSDConfig(
    lookback=48,
    horizon=24,
    n_channels=1,
    d_model=32,
    n_heads=4,
    n_blocks=3,
    ffn_dim=64,
    base_channels=8,
    dropout=0.0,
)
SINE_SETTINGS = TrainSettings(
    learning_rate=1e-3,
    weight_decay=0.0,
    scheduler_gamma=1.0,
    scheduler_step=1,
    epochs=500,
    batch_size=32,
    max_steps=500,
)
