from .network import (
    ATTENTION,
    EMBED_POOL_MLP,
    ContractError,
    EncoderConfig,
    NetworkParams,
    NumericalError,
    byol_loss,
    collapse_metric,
    ema_update,
    encode,
    init_params,
    loss_and_grads,
    predict,
    project,
    symmetric_loss,
)
from .train import (
    Classifier,
    EpochRecord,
    PretrainResult,
    TrainConfig,
    TrainingError,
    finetune,
    init_classifier,
    pretrain,
)


def backward(online, target, batch):
    """Gradients of the mean symmetric loss of a padded batch w.r.t. the online parameters only."""
    return loss_and_grads(online, target, batch.v, batch.v_prime)[1]
