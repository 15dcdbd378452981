"""Minimal H.264 Annex-B stream writer for parser fixtures.

Plays the encoder's role: emits syntactically valid SPS/PPS/slice headers
with known settings (resolution, QP, frame types, sizes) that the parser
under test must recover exactly. Shares no code with the parser — this is a
bit WRITER built from the syntax tables, including emulation-prevention
insertion.
"""

from dataclasses import dataclass, field


class BitWriter:
    def __init__(self):
        self._bits = []

    def u(self, value, n):
        """n-bit unsigned, MSB first."""
        for shift in range(n - 1, -1, -1):
            self._bits.append((value >> shift) & 1)
        return self

    def ue(self, value):
        """Unsigned Exp-Golomb."""
        code = value + 1
        width = code.bit_length()
        self.u(0, width - 1)
        self.u(code, width)
        return self

    def se(self, value):
        """Signed Exp-Golomb (1 -> 1, -1 -> 2, 2 -> 3, ...)."""
        code = 2 * value - 1 if value > 0 else -2 * value
        return self.ue(code)

    def rbsp_trailing(self):
        self._bits.append(1)
        while len(self._bits) % 8:
            self._bits.append(0)
        return self

    def to_bytes(self):
        assert len(self._bits) % 8 == 0, "call rbsp_trailing() first"
        out = bytearray()
        for i in range(0, len(self._bits), 8):
            byte = 0
            for bit in self._bits[i:i + 8]:
                byte = (byte << 1) | bit
            out.append(byte)
        return bytes(out)


def escape_emulation(rbsp):
    """Insert 0x03 after any 00 00 followed by a byte <= 3."""
    out = bytearray()
    zeros = 0
    for byte in rbsp:
        if zeros >= 2 and byte <= 0x03:
            out.append(0x03)
            zeros = 0
        out.append(byte)
        zeros = zeros + 1 if byte == 0 else 0
    return bytes(out)


def nal_bytes(ref_idc, nal_type, rbsp, long_start_code=True):
    start = b"\x00\x00\x00\x01" if long_start_code else b"\x00\x00\x01"
    header = bytes([(ref_idc << 5) | nal_type])
    return start + header + escape_emulation(rbsp)


def sps_rbsp(width_px, height_px, level_idc=31, log2_max_frame_num=8):
    """Baseline-profile SPS with pic_order_cnt_type 2 (no POC syntax in
    slices). Resolutions not divisible by 16 get bottom/right cropping."""
    width_mbs = (width_px + 15) // 16
    height_mbs = (height_px + 15) // 16
    crop_right = (width_mbs * 16 - width_px) // 2   # CropUnitX = 2 (4:2:0)
    crop_bottom = (height_mbs * 16 - height_px) // 2  # CropUnitY = 2 (frame_mbs_only)
    assert width_mbs * 16 - 2 * crop_right == width_px, "width must be even"
    assert height_mbs * 16 - 2 * crop_bottom == height_px, "height must be even"

    w = BitWriter()
    w.u(66, 8)          # profile_idc = baseline
    w.u(0, 8)           # constraint flags + reserved
    w.u(level_idc, 8)
    w.ue(0)             # sps_id
    w.ue(log2_max_frame_num - 4)
    w.ue(2)             # pic_order_cnt_type
    w.ue(1)             # max_num_ref_frames
    w.u(0, 1)           # gaps_in_frame_num_value_allowed_flag
    w.ue(width_mbs - 1)
    w.ue(height_mbs - 1)
    w.u(1, 1)           # frame_mbs_only_flag
    w.u(1, 1)           # direct_8x8_inference_flag
    if crop_right or crop_bottom:
        w.u(1, 1)
        w.ue(0).ue(crop_right).ue(0).ue(crop_bottom)
    else:
        w.u(0, 1)
    w.u(0, 1)           # vui_parameters_present_flag
    w.rbsp_trailing()
    return w.to_bytes()


def pps_rbsp(pic_init_qp=26):
    w = BitWriter()
    w.ue(0)             # pps_id
    w.ue(0)             # sps_id
    w.u(0, 1)           # entropy_coding_mode_flag (CAVLC)
    w.u(0, 1)           # bottom_field_pic_order_in_frame_present_flag
    w.ue(0)             # num_slice_groups_minus1
    w.ue(0)             # num_ref_idx_l0_default_active_minus1
    w.ue(0)             # num_ref_idx_l1_default_active_minus1
    w.u(0, 1)           # weighted_pred_flag
    w.u(0, 2)           # weighted_bipred_idc
    w.se(pic_init_qp - 26)
    w.se(0)             # pic_init_qs_minus26
    w.se(0)             # chroma_qp_index_offset
    w.u(0, 1)           # deblocking_filter_control_present_flag
    w.u(0, 1)           # constrained_intra_pred_flag
    w.u(0, 1)           # redundant_pic_cnt_present_flag
    w.rbsp_trailing()
    return w.to_bytes()


def slice_rbsp(kind, frame_num, qp_delta, first_mb=0, ref_idc=1,
               log2_max_frame_num=8, filler=b""):
    """kind: 'IDR', 'P' or 'B'. Header bits + trailing + raw filler bytes
    standing in for macroblock data (the parser never reads past the QP)."""
    idr = kind == "IDR"
    slice_type = {"IDR": 7, "P": 5, "B": 6}[kind]  # 'all slices same type' codes
    w = BitWriter()
    w.ue(first_mb)
    w.ue(slice_type)
    w.ue(0)             # pps_id
    w.u(frame_num, log2_max_frame_num)
    if idr:
        w.ue(0)         # idr_pic_id
    if kind == "B":
        w.u(0, 1)       # direct_spatial_mv_pred_flag
    if kind in ("P", "B"):
        w.u(0, 1)       # num_ref_idx_active_override_flag
        w.u(0, 1)       # ref_pic_list_modification_flag_l0
    if kind == "B":
        w.u(0, 1)       # ref_pic_list_modification_flag_l1
    if ref_idc:
        if idr:
            w.u(0, 1)   # no_output_of_prior_pics_flag
            w.u(0, 1)   # long_term_reference_flag
        else:
            w.u(0, 1)   # adaptive_ref_pic_marking_mode_flag
    w.se(qp_delta)
    w.rbsp_trailing()
    return w.to_bytes() + filler


@dataclass
class TruthFrame:
    kind: str          # 'I', 'P' or 'B'
    qp: int
    size_bytes: int    # NAL extents incl. parameter sets attached to this AU


@dataclass
class StreamTruth:
    """What the fixture encoder actually emitted."""
    width: int
    height: int
    frames: list = field(default_factory=list)
    total_bytes: int = 0
    start_code_bytes: int = 0


def build_stream(width, height, frame_specs, pic_init_qp=26, filler_bytes=900,
                 filler_pattern=b"\xaa", extra_filler=None):
    """Assemble SPS+PPS+slices; returns (stream bytes, StreamTruth).

    frame_specs: list of (kind, qp) with kind in {'IDR','P','B'}; sizes are
    controlled by the filler length and recorded post-escaping, so the truth
    reflects the exact bytes written. ``extra_filler`` maps frame index ->
    bytes appended to that frame's filler (e.g. to force emulation
    sequences).
    """
    log2_mfn = 8
    pieces = []
    truth = StreamTruth(width=width, height=height)

    pieces.append(nal_bytes(3, 7, sps_rbsp(width, height, log2_max_frame_num=log2_mfn)))
    pieces.append(nal_bytes(3, 8, pps_rbsp(pic_init_qp=pic_init_qp)))
    pending = sum(len(p) - 4 for p in pieces)  # NAL extents minus start codes
    start_code_bytes = 4 * len(pieces)

    frame_num = 0
    for index, (kind, qp) in enumerate(frame_specs):
        if kind == "IDR":
            frame_num = 0  # IDR pictures restart frame_num
        filler = filler_pattern * filler_bytes
        if extra_filler and index in extra_filler:
            filler += extra_filler[index]
        rbsp = slice_rbsp(kind, frame_num % (1 << log2_mfn), qp - pic_init_qp,
                          ref_idc=3 if kind == "IDR" else 1,
                          log2_max_frame_num=log2_mfn, filler=filler)
        unit = nal_bytes(3 if kind == "IDR" else 1, 5 if kind == "IDR" else 1,
                         rbsp, long_start_code=False)
        pieces.append(unit)
        start_code_bytes += 3
        truth.frames.append(TruthFrame(
            kind="I" if kind == "IDR" else kind,
            qp=qp,
            size_bytes=pending + len(unit) - 3,
        ))
        pending = 0
        frame_num += 1

    stream = b"".join(pieces)
    truth.total_bytes = len(stream)
    truth.start_code_bytes = start_code_bytes
    return stream, truth
