"""
Strategy presets: named bundles of config overrides
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional


@dataclass
class StrategyPreset:
    """A named set of config values applied before the config file's own keys"""
    preset_id: str
    name: str
    category: str  # "table" for the five comparison columns, "case-study" otherwise
    values: Dict[str, str] = field(default_factory=dict)

    def __hash__(self):
        return hash(self.preset_id)


DECREASING_ALPHA = {"alpha.schedule": "linear", "alpha.start": "1.0", "alpha.end": "0.0"}


def _edge_alpha(value: str) -> Dict[str, str]:
    return {"alpha.schedule": "constant", "alpha.value": value, "alpha.double_at_edge": "true"}


class PresetManager:
    """Manages strategy presets"""

    def __init__(self):
        self.presets = {}
        self._initialize_default_presets()

    def _initialize_default_presets(self):
        """Create the built-in presets"""
        self.add_preset(StrategyPreset(
            preset_id="random",
            name="Random sampling",
            category="table",
            values={"synth.method": "random", **_edge_alpha("0.0")}
        ))

        self.add_preset(StrategyPreset(
            preset_id="generator",
            name="Generator, decreasing alpha",
            category="table",
            values={"synth.method": "generator", **DECREASING_ALPHA}
        ))

        self.add_preset(StrategyPreset(
            preset_id="generator-alpha1",
            name="Generator, alpha = 1",
            category="table",
            values={"synth.method": "generator", **_edge_alpha("1.0")}
        ))

        direct = {"synth.method": "direct", "opt.method": "rmsprop", "opt.lr": "0.1", "opt.steps": "2"}
        self.add_preset(StrategyPreset(
            preset_id="direct",
            name="Direct optimization, decreasing alpha",
            category="table",
            values={**direct, **DECREASING_ALPHA}
        ))

        self.add_preset(StrategyPreset(
            preset_id="direct-alpha1",
            name="Direct optimization, alpha = 1",
            category="table",
            values={**direct, **_edge_alpha("1.0")}
        ))

        # Digit images: log-cosh losses, L1 input penalty, pull towards a random class value
        self.add_preset(StrategyPreset(
            preset_id="digits-direct",
            name="Digits, direct optimization",
            category="case-study",
            values={
                "synth.method": "direct",
                "synth.sampler": "domain",
                "synth.low": "0.0",
                "synth.high": "1.0",
                "loss.discrepancy": "logcosh",
                "loss.epsilon": "1e-6",
                "loss.input_penalty": "l1",
                "loss.beta": "1e-6",
                "loss.output_penalty": "teacher-to-random",
                "loss.gamma": "1.0",
                "loss.y_rand": "integer",
                "opt.method": "rmsprop",
                "opt.lr": "1e-3",
                "opt.steps": "20",
                "generator.rounds": "20",
                "student.loss": "logcosh",
                **DECREASING_ALPHA,
            }
        ))

        # Black-box teacher on simplex-constrained compositions
        self.add_preset(StrategyPreset(
            preset_id="protein-de",
            name="Compositions, differential evolution",
            category="case-study",
            values={
                "synth.method": "direct",
                "synth.sampler": "domain",
                "synth.low": "0.0",
                "synth.high": "1.0",
                "synth.simplex": "true",
                "loss.discrepancy": "squared",
                "loss.epsilon": "0.05",
                "loss.beta": "0.0",
                "loss.output_penalty": "teacher-to-random",
                "loss.gamma": "0.95",
                "loss.y_rand": "real",
                "opt.method": "differential-evolution",
                "de.iterations": "25",
                "student.kind": "rbf",
                "student.centers": "100",
                "student.weight_decay": "1e-6",
                **DECREASING_ALPHA,
            }
        ))

    def add_preset(self, preset: StrategyPreset):
        """Add a preset"""
        self.presets[preset.preset_id] = preset

    def get_preset(self, preset_id: str) -> Optional[StrategyPreset]:
        """Get preset by ID"""
        return self.presets.get(preset_id)

    def get_all_presets(self) -> List[StrategyPreset]:
        return list(self.presets.values())

    def get_presets_by_category(self, category: str) -> List[StrategyPreset]:
        return [p for p in self.presets.values() if p.category == category]
