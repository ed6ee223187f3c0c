"""
Distillation constants and default hyperparameters
"""

# Numeric core
RMSPROP_RHO = 0.99
RMSPROP_EPS = 1e-8
GRADCHECK_STEP = 1e-6

# Student training, tabular defaults
STUDENT_LR = 1e-3
STUDENT_WEIGHT_DECAY = 1e-5
BATCH_SIZE = 50
BATCHES_PER_EPOCH = 10
EPOCHS = 2000
STUDENT_HIDDEN = 50
VALIDATE_EVERY = 1

# Teacher
TEACHER_HIDDEN = 500
TEACHER_EPOCHS = 200
TEACHER_LR = 1e-3
TEACHER_BATCH_SIZE = 50
KRR_RIDGE = 1e-3

# Generator network
GENERATOR_LATENT = 10
GENERATOR_HIDDEN = 128
GENERATOR_LR = 1e-3
GENERATOR_ROUNDS = 1

# Generator loss weights
LOSS_BETA = 1e-5
LOSS_GAMMA = 1e-5
LOSS_EPSILON = 1.0

# Direct optimization
DIRECT_LR = 0.1
DIRECT_STEPS = 2

# Differential evolution (best/2/bin)
DE_POPULATION = 15
DE_F = 0.8
DE_CR = 0.9
DE_ITERATIONS = 25
DE_MIN_POPULATION = 5  # best2 draws four distinct partners

# Samplers
QMC_BOUND = 3.0  # +-3 sigma box in standardized space

# RBF student
RBF_CENTERS = 100

# Dataset protocol
SPLIT_TRAIN = 5000
SPLIT_VAL_FRACTION = 0.10

# File formats
MODEL_FORMAT_TAG = "regraft-model"
MODEL_FORMAT_VERSION = "v1"
FLOAT_FORMAT = "%.17g"

METRICS_HEADER = ["epoch", "loss_combined", "loss_xg", "loss_xp", "alpha", "val_rmse", "wall_s"]
EVALUATE_HEADER = ["model", "split", "metric", "value"]
GEN_DUMP_COLUMNS = ["teacher_pred", "student_pred", "student_loss", "epoch_tag"]  # after x0..x{d-1}
SPLIT_HEADER = ["row", "split"]
BOUNDS_HEADER = ["trace", "check", "t", "d", "eta", "k_hat", "k_convention",
                 "bound", "observed", "exact_bound", "satisfied", "advisory"]

SEED_ENV_VAR = "REGRAFT_SEED"

# CLI exit codes
EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_RUNTIME_ERROR = 2
