from .autograd import Tensor, concat_last
from .transformer import (
    GENERIC,
    PERSONALIZED,
    Adam,
    Hyper,
    ModelParams,
    NumericError,
    TrainingError,
    attention,
    attention_weights,
    bce_loss,
    compute_gradients,
    embed_common,
    embed_personal,
    forward,
    forward_batch,
    positional_encoding,
    predict_batch,
    samples_to_arrays,
    train,
)
from .logistic import (
    LogisticModel,
    episodes_to_features,
    logistic_features,
    logistic_predict,
    logistic_train,
    logistic_train_episodes,
    nll_and_grad,
)
