# Numeric systems: sampling, synthesis, evolution, distillation, training and bounds
