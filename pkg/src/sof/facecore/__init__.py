"""Recognition pipeline: alignment, embedding, open-set classification."""

from .chips import (
    FaceChip,
    align_face,
    chip_to_netpbm,
    netpbm_to_chip,
    read_chip,
    read_image,
    write_chip,
    write_image,
)
from .embedder import (
    EmbedderParams,
    embed,
    embed_chips,
    init_params,
    load_params,
    params_from_json,
    params_to_json,
    save_params,
)
from .gallery import (
    UNKNOWN,
    ClassifyResult,
    GalleryEntry,
    IdentityGallery,
    build_gallery,
    classify,
    update_centroid,
)
from .geometry import (
    DEFAULT_CHIP_SIZE,
    AffineTransform,
    Landmarks,
    solve_alignment,
    template_points,
)

__all__ = [
    "AffineTransform",
    "ClassifyResult",
    "DEFAULT_CHIP_SIZE",
    "EmbedderParams",
    "FaceChip",
    "GalleryEntry",
    "IdentityGallery",
    "Landmarks",
    "UNKNOWN",
    "align_face",
    "build_gallery",
    "chip_to_netpbm",
    "classify",
    "embed",
    "embed_chips",
    "init_params",
    "load_params",
    "netpbm_to_chip",
    "params_from_json",
    "params_to_json",
    "read_chip",
    "read_image",
    "save_params",
    "solve_alignment",
    "template_points",
    "update_centroid",
    "write_chip",
    "write_image",
]
