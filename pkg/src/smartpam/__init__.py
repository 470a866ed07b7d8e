"""Raw-waveform CNN inference, tiled memory planning, streaming detection and device simulation
for a smart passive acoustic monitoring recorder."""

from .device import (
    DeviceProfile,
    SimReport,
    TimingModel,
    cycle_energy_mj,
    deadline_check,
    shunt_current_ma,
    simulate,
)
from .errors import SmartPamError
from .fixtures import gen_fixture
from .modelfile import load_model, save_model
from .nn import (
    Activation,
    ConvLayerSpec,
    DenseSpec,
    ModelSpec,
    conv1d_forward,
    dense_forward,
    model_forward,
    model_size_bytes,
    output_length,
    param_count,
    softmax,
)
from .stream import (
    AudioStream,
    DetectionConfig,
    DetectionOutcome,
    WindowRecord,
    analyse_and_record,
    detection_cycle,
    standardize_window,
    trigger_decision,
    windows,
)
from .tiler import (
    IndexRange,
    MemoryReport,
    TilePlan,
    layer_receptive_range,
    make_tile_plan,
    peak_activation_bytes,
    stack_receptive_range,
    tiled_forward,
)
from .wavio import read_wav, write_wav

__version__ = "0.1.0"
