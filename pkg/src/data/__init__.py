from .dataset import (
    ManifestEntry,
    label_subset,
    load_manifest_dataset,
    phantom_dataset,
    read_manifest,
    split_dataset,
    write_manifest,
    write_phantom_set,
)
from .degrade import (
    NOISE_GRID,
    DegradationSpec,
    add_gaussian_noise,
    degrade_blur,
    degrade_sr,
    make_pair,
    upsample_nearest,
)
from .nifti import NiftiImage, read_nifti1, write_nifti1
from .phantom import SEQUENCES, VIEWS, Phantom, phantom_generate, phantom_sections

__all__ = [
    "NOISE_GRID",
    "SEQUENCES",
    "VIEWS",
    "DegradationSpec",
    "ManifestEntry",
    "NiftiImage",
    "Phantom",
    "add_gaussian_noise",
    "degrade_blur",
    "degrade_sr",
    "label_subset",
    "load_manifest_dataset",
    "make_pair",
    "phantom_dataset",
    "phantom_generate",
    "phantom_sections",
    "read_manifest",
    "read_nifti1",
    "split_dataset",
    "upsample_nearest",
    "write_manifest",
    "write_nifti1",
    "write_phantom_set",
]
