"""Cube I/O, synthetic series, input stacks, augmentation and split protocols."""
from .io import (
    CorruptCubeError,
    CubeFormatError,
    ManifestEntry,
    group_by_patient,
    load_cube,
    load_surfaces,
    read_header,
    read_manifest,
    save_cube,
    save_surfaces,
    write_manifest,
)
from .split import SCHEMES, PlanEntry, SplitError, SplitPlan, check_plan, make_split, partition
from .stack import (
    SeriesPair,
    augment,
    cube_stacks,
    denormalize,
    hflip,
    make_input_stack,
    normalize,
    pair_samples,
    rotate,
)
from .synth import SynthPatient, SynthSpecError, lesion_masks, make_patients, misalignments, synth_series

__all__ = [name for name in dir() if not name.startswith("_")]
