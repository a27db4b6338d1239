from .gradcheck import check_gradients, numeric_grad, relative_error
from .optim import Adam, AdamState, LrSchedule, adam_step, glorot_init, lr_at_epoch, zeros_param
from .tensor import (
    Tape,
    Tensor,
    absolute,
    add,
    as_tensor,
    backward,
    binary_map,
    clip,
    concat,
    current_tape,
    getitem,
    identity,
    log,
    lstm_step,
    matmul,
    mean,
    mul,
    relu,
    reshape,
    sigmoid,
    stack,
    sub,
    sum,
    tanh,
    unary_map,
)
