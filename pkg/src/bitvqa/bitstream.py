"""Lightweight H.264 Annex-B syntax parser.

Extracts exactly what the feature aggregation needs from a raw bytestream
without entropy decoding: NAL boundaries, SPS resolution (cropping applied),
slice types and slice QP (pic_init_qp_minus26 + 26 + slice_qp_delta).
Macroblock-level statistics (skip ratio, motion vectors, per-MB QP) require
a CABAC/CAVLC decode and are out of scope; they enter via the frame-stats
CSV when a full analyzer produced them.

Access units are delimited by slices with first_mb_in_slice == 0; non-VCL
units (SPS/PPS/SEI/AUD) count toward the access unit they precede, so frame
sizes conserve the stream's bytes minus start codes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

from .errors import MalformedStreamError, UnsupportedFeatureError
from .features import FrameRecord, FrameType

NAL_SLICE = 1
NAL_SLICE_DPA = 2
NAL_SLICE_DPB = 3
NAL_SLICE_DPC = 4
NAL_SLICE_IDR = 5
NAL_SEI = 6
NAL_SPS = 7
NAL_PPS = 8

# profiles whose SPS carries the high-profile extension block
_HIGH_PROFILES = {100, 110, 122, 244, 44, 83, 86, 118, 128, 138, 139, 134, 135}

_SLICE_TYPE_MAP = {0: FrameType.P, 1: FrameType.B, 2: FrameType.I,
                   3: FrameType.P, 4: FrameType.I}  # SP -> P, SI -> I


@dataclass(frozen=True)
class NalUnit:
    """One NAL unit: header fields plus its RBSP payload.

    ``payload`` excludes the start code and the one-byte NAL header and has
    emulation-prevention bytes removed. ``raw_size`` is the unit's extent in
    the original stream (header + escaped payload, start code excluded).
    """

    nal_type: int
    nal_ref_idc: int
    payload: bytes
    offset: int
    raw_size: int


@dataclass(frozen=True)
class SpsInfo:
    """Sequence parameter set fields needed downstream."""

    sps_id: int
    profile_idc: int
    level_idc: int
    width_px: int
    height_px: int
    chroma_format_idc: int
    separate_colour_plane_flag: int
    log2_max_frame_num: int
    pic_order_cnt_type: int
    log2_max_pic_order_cnt_lsb: int
    delta_pic_order_always_zero_flag: int
    frame_mbs_only_flag: int


@dataclass(frozen=True)
class PpsInfo:
    pps_id: int
    sps_id: int
    entropy_coding_mode_flag: int
    bottom_field_pic_order_in_frame_present_flag: int
    num_ref_idx_l0_default_active: int
    num_ref_idx_l1_default_active: int
    weighted_pred_flag: int
    weighted_bipred_idc: int
    pic_init_qp: int
    redundant_pic_cnt_present_flag: int


class BitReader:
    """MSB-first bit reader over an RBSP byte string."""

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0  # bit position

    def read_bit(self) -> int:
        byte_index = self._pos >> 3
        if byte_index >= len(self._data):
            raise MalformedStreamError("bitstream exhausted mid-syntax")
        bit = (self._data[byte_index] >> (7 - (self._pos & 7))) & 1
        self._pos += 1
        return bit

    def read_bits(self, n: int) -> int:
        value = 0
        for _ in range(n):
            value = (value << 1) | self.read_bit()
        return value

    def read_ue(self) -> int:
        """Unsigned Exp-Golomb ue(v)."""
        leading_zeros = 0
        while self.read_bit() == 0:
            leading_zeros += 1
            if leading_zeros > 32:
                raise MalformedStreamError("Exp-Golomb code too long (corrupt stream?)")
        if leading_zeros == 0:
            return 0
        return (1 << leading_zeros) - 1 + self.read_bits(leading_zeros)

    def read_se(self) -> int:
        """Signed Exp-Golomb se(v)."""
        code = self.read_ue()
        magnitude = (code + 1) // 2
        return magnitude if code % 2 == 1 else -magnitude


def read_exp_golomb(bits: BitReader) -> int:
    """Read one ue(v) code; the reader advances past it."""
    return bits.read_ue()


def _unescape(data: bytes) -> bytes:
    """Remove emulation-prevention bytes (00 00 03 xx -> 00 00 xx)."""
    if b"\x00\x00\x03" not in data:
        return data
    out = bytearray()
    zeros = 0
    i = 0
    while i < len(data):
        byte = data[i]
        if zeros >= 2 and byte == 0x03 and i + 1 < len(data) and data[i + 1] <= 0x03:
            zeros = 0
            i += 1
            continue
        out.append(byte)
        zeros = zeros + 1 if byte == 0 else 0
        i += 1
    return bytes(out)


def split_annexb(data: bytes) -> list[NalUnit]:
    """Split an Annex-B bytestream into NAL units.

    Accepts 3- and 4-byte start codes. Raises on inputs with no start code
    at all (not an Annex-B stream).
    """
    starts: list[tuple[int, int]] = []  # (payload start, start-code length)
    i = 0
    n = len(data)
    while i + 2 < n:
        if data[i] == 0 and data[i + 1] == 0 and data[i + 2] == 1:
            # a zero immediately before 00 00 01 belongs to a 4-byte code
            code_len = 4 if i > 0 and data[i - 1] == 0 else 3
            starts.append((i + 3, code_len))
            i += 3
        else:
            i += 1
    if not starts:
        raise MalformedStreamError("no Annex-B start code found")

    units: list[NalUnit] = []
    for idx, (begin, code_len) in enumerate(starts):
        end = starts[idx + 1][0] - starts[idx + 1][1] if idx + 1 < len(starts) else n
        raw = data[begin:end]
        if not raw:
            continue
        header = raw[0]
        if header & 0x80:
            raise MalformedStreamError(f"forbidden_zero_bit set at offset {begin}")
        units.append(NalUnit(
            nal_type=header & 0x1F,
            nal_ref_idc=(header >> 5) & 0x3,
            payload=_unescape(raw[1:]),
            offset=begin - code_len,
            raw_size=len(raw),
        ))
    if not units:
        raise MalformedStreamError("stream contains start codes but no NAL payloads")
    return units


def _read_scaling_list(r: BitReader, size: int) -> None:
    last_scale, next_scale = 8, 8
    for _ in range(size):
        if next_scale != 0:
            delta = r.read_se()
            next_scale = (last_scale + delta + 256) % 256
        last_scale = last_scale if next_scale == 0 else next_scale


def parse_sps(nal: NalUnit) -> SpsInfo:
    """Parse a sequence parameter set; resolution includes frame cropping."""
    if nal.nal_type != NAL_SPS:
        raise MalformedStreamError(f"expected SPS (type 7), got NAL type {nal.nal_type}")
    r = BitReader(nal.payload)
    profile_idc = r.read_bits(8)
    r.read_bits(8)  # constraint flags + reserved
    level_idc = r.read_bits(8)
    sps_id = r.read_ue()

    chroma_format_idc = 1
    separate_colour_plane_flag = 0
    if profile_idc in _HIGH_PROFILES:
        chroma_format_idc = r.read_ue()
        if chroma_format_idc > 3:
            raise MalformedStreamError(f"chroma_format_idc {chroma_format_idc} out of range")
        if chroma_format_idc == 3:
            separate_colour_plane_flag = r.read_bit()
            if separate_colour_plane_flag:
                raise UnsupportedFeatureError("separate colour planes are not supported")
        r.read_ue()  # bit_depth_luma_minus8
        r.read_ue()  # bit_depth_chroma_minus8
        r.read_bit()  # qpprime_y_zero_transform_bypass_flag
        if r.read_bit():  # seq_scaling_matrix_present_flag
            count = 8 if chroma_format_idc != 3 else 12
            for idx in range(count):
                if r.read_bit():
                    _read_scaling_list(r, 16 if idx < 6 else 64)

    log2_max_frame_num = r.read_ue() + 4
    pic_order_cnt_type = r.read_ue()
    log2_max_pic_order_cnt_lsb = 0
    delta_pic_order_always_zero_flag = 0
    if pic_order_cnt_type == 0:
        log2_max_pic_order_cnt_lsb = r.read_ue() + 4
    elif pic_order_cnt_type == 1:
        delta_pic_order_always_zero_flag = r.read_bit()
        r.read_se()  # offset_for_non_ref_pic
        r.read_se()  # offset_for_top_to_bottom_field
        for _ in range(r.read_ue()):
            r.read_se()
    elif pic_order_cnt_type > 2:
        raise MalformedStreamError(f"pic_order_cnt_type {pic_order_cnt_type} out of range")

    r.read_ue()  # max_num_ref_frames
    r.read_bit()  # gaps_in_frame_num_value_allowed_flag
    pic_width_in_mbs = r.read_ue() + 1
    pic_height_in_map_units = r.read_ue() + 1
    frame_mbs_only_flag = r.read_bit()
    if not frame_mbs_only_flag:
        r.read_bit()  # mb_adaptive_frame_field_flag
    r.read_bit()  # direct_8x8_inference_flag

    crop_left = crop_right = crop_top = crop_bottom = 0
    if r.read_bit():  # frame_cropping_flag
        crop_left = r.read_ue()
        crop_right = r.read_ue()
        crop_top = r.read_ue()
        crop_bottom = r.read_ue()

    chroma_array_type = 0 if separate_colour_plane_flag else chroma_format_idc
    if chroma_array_type == 0:
        crop_unit_x, crop_unit_y = 1, 2 - frame_mbs_only_flag
    else:
        sub_w = 2 if chroma_array_type in (1, 2) else 1
        sub_h = 2 if chroma_array_type == 1 else 1
        crop_unit_x = sub_w
        crop_unit_y = sub_h * (2 - frame_mbs_only_flag)

    width = pic_width_in_mbs * 16 - crop_unit_x * (crop_left + crop_right)
    height = (2 - frame_mbs_only_flag) * pic_height_in_map_units * 16 \
        - crop_unit_y * (crop_top + crop_bottom)
    if width <= 0 or height <= 0:
        raise MalformedStreamError(f"cropping leaves a non-positive resolution ({width}x{height})")

    return SpsInfo(
        sps_id=sps_id,
        profile_idc=profile_idc,
        level_idc=level_idc,
        width_px=width,
        height_px=height,
        chroma_format_idc=chroma_format_idc,
        separate_colour_plane_flag=separate_colour_plane_flag,
        log2_max_frame_num=log2_max_frame_num,
        pic_order_cnt_type=pic_order_cnt_type,
        log2_max_pic_order_cnt_lsb=log2_max_pic_order_cnt_lsb,
        delta_pic_order_always_zero_flag=delta_pic_order_always_zero_flag,
        frame_mbs_only_flag=frame_mbs_only_flag,
    )


def parse_pps(nal: NalUnit) -> PpsInfo:
    if nal.nal_type != NAL_PPS:
        raise MalformedStreamError(f"expected PPS (type 8), got NAL type {nal.nal_type}")
    r = BitReader(nal.payload)
    pps_id = r.read_ue()
    sps_id = r.read_ue()
    entropy_coding_mode_flag = r.read_bit()
    bottom_field_flag = r.read_bit()
    num_slice_groups = r.read_ue() + 1
    if num_slice_groups > 1:
        raise UnsupportedFeatureError("FMO (multiple slice groups) is not supported")
    num_ref_idx_l0 = r.read_ue() + 1
    num_ref_idx_l1 = r.read_ue() + 1
    weighted_pred_flag = r.read_bit()
    weighted_bipred_idc = r.read_bits(2)
    pic_init_qp = r.read_se() + 26
    r.read_se()  # pic_init_qs_minus26
    r.read_se()  # chroma_qp_index_offset
    r.read_bit()  # deblocking_filter_control_present_flag
    r.read_bit()  # constrained_intra_pred_flag
    redundant_pic_cnt_present_flag = r.read_bit()
    return PpsInfo(
        pps_id=pps_id,
        sps_id=sps_id,
        entropy_coding_mode_flag=entropy_coding_mode_flag,
        bottom_field_pic_order_in_frame_present_flag=bottom_field_flag,
        num_ref_idx_l0_default_active=num_ref_idx_l0,
        num_ref_idx_l1_default_active=num_ref_idx_l1,
        weighted_pred_flag=weighted_pred_flag,
        weighted_bipred_idc=weighted_bipred_idc,
        pic_init_qp=pic_init_qp,
        redundant_pic_cnt_present_flag=redundant_pic_cnt_present_flag,
    )


@dataclass(frozen=True)
class SliceHeader:
    first_mb_in_slice: int
    slice_type: int
    pps_id: int
    frame_num: int
    qp: int
    redundant: bool

    @property
    def frame_type(self) -> FrameType:
        return _SLICE_TYPE_MAP.get(self.slice_type % 5, FrameType.UNKNOWN)


def _skip_ref_pic_list_modification(r: BitReader, slice_type_mod: int) -> None:
    if slice_type_mod not in (2, 4):  # not I / SI
        if r.read_bit():
            while True:
                idc = r.read_ue()
                if idc == 3:
                    break
                if idc in (0, 1):
                    r.read_ue()
                elif idc == 2:
                    r.read_ue()
                else:
                    raise MalformedStreamError(f"modification_of_pic_nums_idc {idc} out of range")
    if slice_type_mod == 1:  # B
        if r.read_bit():
            while True:
                idc = r.read_ue()
                if idc == 3:
                    break
                if idc in (0, 1, 2):
                    r.read_ue()
                else:
                    raise MalformedStreamError(f"modification_of_pic_nums_idc {idc} out of range")


def _skip_pred_weight_table(r: BitReader, sps: SpsInfo, slice_type_mod: int,
                            n_l0: int, n_l1: int) -> None:
    r.read_ue()  # luma_log2_weight_denom
    chroma_array_type = 0 if sps.separate_colour_plane_flag else sps.chroma_format_idc
    if chroma_array_type != 0:
        r.read_ue()  # chroma_log2_weight_denom
    for count in ((n_l0,) if slice_type_mod != 1 else (n_l0, n_l1)):
        for _ in range(count):
            if r.read_bit():
                r.read_se()
                r.read_se()
            if chroma_array_type != 0 and r.read_bit():
                for _ in range(2):
                    r.read_se()
                    r.read_se()


def _skip_dec_ref_pic_marking(r: BitReader, idr: bool) -> None:
    if idr:
        r.read_bit()  # no_output_of_prior_pics_flag
        r.read_bit()  # long_term_reference_flag
    else:
        if r.read_bit():  # adaptive_ref_pic_marking_mode_flag
            while True:
                op = r.read_ue()
                if op == 0:
                    break
                if op in (1, 3):
                    r.read_ue()
                if op == 2:
                    r.read_ue()
                if op in (3, 6):
                    r.read_ue()
                if op == 4:
                    r.read_ue()


def parse_slice_header(nal: NalUnit, sps_map: dict[int, SpsInfo],
                       pps_map: dict[int, PpsInfo]) -> SliceHeader:
    """Parse a slice header far enough to recover slice type, frame_num and QP."""
    idr = nal.nal_type == NAL_SLICE_IDR
    r = BitReader(nal.payload)
    first_mb_in_slice = r.read_ue()
    slice_type = r.read_ue()
    if slice_type > 9:
        raise MalformedStreamError(f"slice_type {slice_type} out of range")
    mod = slice_type % 5
    pps_id = r.read_ue()
    pps = pps_map.get(pps_id)
    if pps is None:
        raise MalformedStreamError(f"slice references unknown PPS {pps_id}")
    sps = sps_map.get(pps.sps_id)
    if sps is None:
        raise MalformedStreamError(f"PPS {pps_id} references unknown SPS {pps.sps_id}")

    frame_num = r.read_bits(sps.log2_max_frame_num)
    field_pic_flag = 0
    if not sps.frame_mbs_only_flag:
        field_pic_flag = r.read_bit()
        if field_pic_flag:
            r.read_bit()  # bottom_field_flag
    if idr:
        r.read_ue()  # idr_pic_id
    if sps.pic_order_cnt_type == 0:
        r.read_bits(sps.log2_max_pic_order_cnt_lsb)
        if pps.bottom_field_pic_order_in_frame_present_flag and not field_pic_flag:
            r.read_se()
    elif sps.pic_order_cnt_type == 1 and not sps.delta_pic_order_always_zero_flag:
        r.read_se()
        if pps.bottom_field_pic_order_in_frame_present_flag and not field_pic_flag:
            r.read_se()

    redundant_pic_cnt = 0
    if pps.redundant_pic_cnt_present_flag:
        redundant_pic_cnt = r.read_ue()
    if mod == 1:
        r.read_bit()  # direct_spatial_mv_pred_flag

    n_l0 = pps.num_ref_idx_l0_default_active
    n_l1 = pps.num_ref_idx_l1_default_active
    if mod in (0, 1, 3):  # P, B, SP
        if r.read_bit():  # num_ref_idx_active_override_flag
            n_l0 = r.read_ue() + 1
            if mod == 1:
                n_l1 = r.read_ue() + 1
    _skip_ref_pic_list_modification(r, mod)
    if (pps.weighted_pred_flag and mod in (0, 3)) or (pps.weighted_bipred_idc == 1 and mod == 1):
        _skip_pred_weight_table(r, sps, mod, n_l0, n_l1)
    if nal.nal_ref_idc != 0:
        _skip_dec_ref_pic_marking(r, idr)
    if pps.entropy_coding_mode_flag and mod not in (2, 4):
        r.read_ue()  # cabac_init_idc

    qp = pps.pic_init_qp + r.read_se()
    if not 0 <= qp <= 51:
        raise MalformedStreamError(f"slice QP {qp} outside [0, 51]")
    return SliceHeader(
        first_mb_in_slice=first_mb_in_slice,
        slice_type=slice_type,
        pps_id=pps_id,
        frame_num=frame_num,
        qp=qp,
        redundant=redundant_pic_cnt > 0,
    )


def extract_frames(data: bytes) -> tuple[list[FrameRecord], SpsInfo]:
    """Parse a whole Annex-B stream into per-frame records plus stream info.

    One record per access unit: frame type from the first slice, avg_qp as
    the mean slice QP, size_bytes as the sum of the unit's NAL extents
    (non-VCL units count toward the unit they precede; trailing non-VCL
    bytes count toward the last unit). skip_ratio/avg_mv stay absent.
    """
    units = split_annexb(data)

    sps_map: dict[int, SpsInfo] = {}
    pps_map: dict[int, PpsInfo] = {}
    active_sps: Optional[SpsInfo] = None
    pending_bytes = 0

    frames: list[FrameRecord] = []
    au_type: Optional[FrameType] = None
    au_qps: list[int] = []
    au_bytes = 0

    def flush() -> None:
        nonlocal au_bytes, au_type, au_qps
        if au_type is None:
            return
        frames.append(FrameRecord(
            index=len(frames),
            frame_type=au_type,
            size_bytes=au_bytes,
            avg_qp=sum(au_qps) / len(au_qps),
        ))
        au_bytes = 0
        au_type = None
        au_qps = []

    for nal in units:
        if nal.nal_type == NAL_SPS:
            sps = parse_sps(nal)
            previous = sps_map.get(sps.sps_id)
            if previous is not None and previous != sps and frames:
                warnings.warn(f"SPS {sps.sps_id} changed mid-stream; "
                              "resolution-dependent aggregates may be mixed", stacklevel=2)
            sps_map[sps.sps_id] = sps
            pending_bytes += nal.raw_size
        elif nal.nal_type == NAL_PPS:
            pps = parse_pps(nal)
            pps_map[pps.pps_id] = pps
            pending_bytes += nal.raw_size
        elif nal.nal_type in (NAL_SLICE_DPA, NAL_SLICE_DPB, NAL_SLICE_DPC):
            raise UnsupportedFeatureError("slice data partitioning is not supported")
        elif nal.nal_type in (NAL_SLICE, NAL_SLICE_IDR):
            if not sps_map or not pps_map:
                raise MalformedStreamError("slice encountered before SPS/PPS")
            header = parse_slice_header(nal, sps_map, pps_map)
            if active_sps is None:
                active_sps = sps_map[pps_map[header.pps_id].sps_id]
            if header.redundant:
                au_bytes += nal.raw_size  # redundant slices belong to the current unit
                continue
            if header.first_mb_in_slice == 0:
                flush()
                au_type = FrameType.I if nal.nal_type == NAL_SLICE_IDR else header.frame_type
                au_bytes = pending_bytes + nal.raw_size
                pending_bytes = 0
                au_qps = [header.qp]
            else:
                if au_type is None:
                    raise MalformedStreamError("first slice of the stream has first_mb_in_slice != 0")
                au_bytes += nal.raw_size
                au_qps.append(header.qp)
        else:
            pending_bytes += nal.raw_size

    if au_type is None and not frames:
        raise MalformedStreamError("stream contains no slices")
    au_bytes += pending_bytes  # trailing non-VCL units stick to the last frame
    flush()
    if active_sps is None:
        raise MalformedStreamError("no SPS active at the first slice")
    return frames, active_sps


def stream_metadata(data: bytes) -> dict:
    """Structural summary used for the extraction sidecar JSON."""
    units = split_annexb(data)
    counts: dict[int, int] = {}
    for nal in units:
        counts[nal.nal_type] = counts.get(nal.nal_type, 0) + 1
    frames, sps = extract_frames(data)
    return {
        "width_px": sps.width_px,
        "height_px": sps.height_px,
        "profile_idc": sps.profile_idc,
        "level_idc": sps.level_idc,
        "frame_count": len(frames),
        "nal_counts": {str(k): v for k, v in sorted(counts.items())},
        "total_bytes": len(data),
    }
