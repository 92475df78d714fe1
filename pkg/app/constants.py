class PointwiseOp:
    """
    Element-wise operations supported by the tensor core
    """
    PRODUCT = 'product'
    SUM = 'sum'
    RELU = 'relu'
    SIGMOID = 'sigmoid'

    BINARY = (PRODUCT, SUM)
    UNARY = (RELU, SIGMOID)

class Precision:
    FLOAT64 = 'float64'
    FLOAT32 = 'float32'

class ExitStatus:
    OK = 0
    CHECK_FAILED = 1
    INVALID_INPUT = 2
    NUMERIC_BLOW_UP = 3

# weight archive
WEIGHTS_MAGIC = b'MLKP'
WEIGHTS_FORMAT_VERSION = 1
DTYPE_TAGS = {
    'float64': 1,
    'float32': 2,
}

# kernel representation
MAX_SUPPORTED_ORDER = 3
FULL_SCALE_ORDER = 3
FULL_SCALE_RANK = 4096
FULL_SCALE_SWEEP = ((1, None), (2, 2048), (2, 4096), (3, 2048), (3, 4096), (3, 8192))

# toy backbone: stem, block4 and block5 each halve the resolution
FEATURE_STRIDE = 8

# detection
DEFAULT_POOL_SIZE = 7
BACKGROUND_CLASS = 0
REGRESSION_LOSS_WEIGHT = 1.0
BOX_DELTA_CLAMP = 4.135  # ln(1000 / 16)

# synthetic scenes
FILL_PATTERNS = ('solid', 'striped', 'checkered')
PATTERN_PERIOD = 4
MAX_SCENE_OVERLAP = 0.3
MIN_BOX_AREA = 16
PLACEMENT_ATTEMPTS = 100

# oracle limits
ORACLE_MAX_CHANNELS = 32
ORACLE_MAX_RANK = 64
ORACLE_MAX_PIXELS = 64
PREDICTOR_MAX_CHANNELS = 8

# file outputs
FLOAT_FORMAT = '{:.6f}'
ANNOTATIONS_FILE = 'annotations.txt'
SCENE_FILE_TEMPLATE = 'scene_{index:05d}.png'

CONFIG_PATH = './run.cfg'

# backbone blocks whose layers may be fused, shallow to deep
BACKBONE_BLOCKS = ('block4', 'block5')

# random streams of a scene index
PROPOSAL_STREAM = 1
EVAL_PROPOSAL_STREAM = 2

# oracle suite sizes
ROI_ORACLE_TRIALS = 200
NMS_ORACLE_BOXES = 50

# ablation variants: (name, order, location weight, multi-scale fusion)
ABLATION_VARIANTS = (
    ('first_order', 1, False, True),
    ('order2', 2, True, True),
    ('order3', 3, True, True),
    ('order3_no_location', 3, False, True),
    ('order3_single_scale', 3, True, False),
)
ABLATION_BASELINE = 'first_order'
ABLATION_TARGET = 'order3'
