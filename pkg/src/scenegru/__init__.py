"""Audio scene classification with label-tree embeddings and deep GRU networks.

The package is organized as a small numpy/scipy library:

- :mod:`scenegru.numeric` -- dense kernels, seeded RNG, finite-difference oracle
- :mod:`scenegru.gru` -- deep GRU forward/backward and checkpoints
- :mod:`scenegru.training` -- cross-entropy + L2 loss, Adam, the training loop
- :mod:`scenegru.features` -- framing, spectra, the three low-level feature sets,
  noise subtraction, and the feature-sequence file format
- :mod:`scenegru.lte` -- label trees and label-tree-embedding sequences
- :mod:`scenegru.voting` -- subsequence splitting and the four voting schemes
- :mod:`scenegru.svm` -- one-vs-rest linear SVM calibration with Platt scaling
- :mod:`scenegru.evaluate` -- metrics, synthetic datasets, experiment driver
- :mod:`scenegru.cli` -- command-line front end
"""

from .numeric import (
    affine,
    finite_diff_grad,
    glorot_init,
    seeded_rng,
    sigmoid,
    softmax,
    tanh_elem,
)
from .gru import (
    GruLayerParams,
    NetworkParams,
    OutputParams,
    backward_batch,
    backward_subsequence,
    forward_batch,
    forward_subsequence,
    gru_cell_forward,
    init_network,
    load_checkpoint,
    save_checkpoint,
)
from .training import (
    AdamState,
    LabeledSubsequence,
    TrainConfig,
    adam_step,
    batch_loss,
    extract_outputs,
    train,
)
from .voting import (
    SubsequencePlan,
    aggregate_multi,
    aggregate_single,
    split_subsequences,
    subsequence_starts,
)
from .lte import (
    LabelTree,
    LteSequence,
    build_label_tree,
    dual_channel_lte,
    fuse_streams,
    load_tree,
    lte_transform,
    lte_transform_batch,
    save_tree,
)
from .svm import (
    LinearSvmModel,
    PlattParams,
    platt_apply,
    platt_scale,
    svm_scores,
    train_linear_svm,
)
from .features import (
    AudioClip,
    FrameSpec,
    SegmentFeatureSequence,
    frame_signal,
    gammatone64,
    logfreq68,
    mfcc60,
    noise_subtract,
    power_spectrum,
    read_wav,
    segment_features,
    write_wav,
)
from .evaluate import (
    DatasetManifest,
    MetricsReport,
    RunConfig,
    metrics,
    run_experiment,
    synth_audio_dataset,
    synth_lte_dataset,
)

__version__ = "0.1.0"
