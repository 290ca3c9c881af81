from .augment import augment, crop_resize, hflip, rescale, resize_array
from .netpbm import NetpbmError, read_image, write_image
from .synthetic import (DatasetSpec, GenerationError, Sample, generate_synthetic, load_dataset,
                        object_size_class, save_dataset)

__all__ = [
    "DatasetSpec", "GenerationError", "NetpbmError", "Sample", "augment", "crop_resize",
    "generate_synthetic", "hflip", "load_dataset", "object_size_class", "read_image", "rescale",
    "resize_array", "save_dataset", "write_image",
]
