//! Learning-rate presets, and what the learning-rate factor and schedule
//! stretching do to them.

use selective_backprop::*;

fn main() {
    for preset in Preset::ALL {
        let cfg = preset.config();
        let samples: Vec<String> = [0.0, 0.25, 0.5, 0.75, 0.99]
            .iter()
            .map(|f| format!("{:.5}", lr_at(&cfg, f * cfg.total_epochs() as f64)))
            .collect();
        println!(
            "{preset:>16}: {} epochs, lr at 0/25/50/75/99%: {}",
            cfg.total_epochs(),
            samples.join(" ")
        );
    }

    for (factor, stretch) in [(1.0, false), (0.5, false), (0.5, true), (2.0, true)] {
        let cfg = TrainConfig {
            lr_factor: factor,
            stretch_schedule: stretch,
            ..Preset::CifarStyle.config()
        };
        println!(
            "cifar_style factor {factor} stretch {stretch:>5}: initial {:.3}, milestones {:?}, {} epochs",
            cfg.initial_lr(),
            cfg.effective_milestones(),
            cfg.total_epochs()
        );
    }
}
