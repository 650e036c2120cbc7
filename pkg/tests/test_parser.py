"""Binary-format decoding: structure, limits, and feature rejection."""

import pytest

from capvm import wasm
from oracle_harness import oracle_wasm

EMPTY = bytes([0x00, 0x61, 0x73, 0x6D, 0x01, 0x00, 0x00, 0x00])


def test_smallest_valid_module():
    mod = wasm.parse_module(EMPTY)
    assert mod.types == [] and mod.funcs == [] and mod.exports == {}


def test_bad_magic_first_byte():
    with pytest.raises(wasm.BadMagic):
        wasm.parse_module(b"\xff" + EMPTY[1:])


def test_bad_magic_short_input():
    with pytest.raises(wasm.BadMagic):
        wasm.parse_module(b"\x00as")


def test_bad_version():
    with pytest.raises(wasm.BadVersion):
        wasm.parse_module(EMPTY[:4] + b"\x02\x00\x00\x00")
    with pytest.raises(wasm.BadVersion):
        wasm.parse_module(EMPTY[:6])


def test_exported_add_function():
    mod = wasm.parse_module(oracle_wasm("op_i32_add"))
    assert len(mod.types) == 1
    assert mod.types[0].params == ("i32", "i32")
    assert mod.types[0].results == ("i32",)
    assert len(mod.funcs) == 1
    assert mod.exports == {"run": ("func", 0)}


def test_section_size_mismatch():
    # type section claiming 100 bytes but holding none
    data = EMPTY + bytes([0x01, 0x64])
    with pytest.raises(wasm.MalformedSection):
        wasm.parse_module(data)


def test_trailing_bytes_in_section():
    # type section: size 4, vec of 0 entries, then 3 stray bytes
    data = EMPTY + bytes([0x01, 0x04, 0x00, 0xAA, 0xBB, 0xCC])
    with pytest.raises(wasm.MalformedSection):
        wasm.parse_module(data)


def test_duplicate_section_rejected():
    data = EMPTY + bytes([0x01, 0x01, 0x00]) + bytes([0x01, 0x01, 0x00])
    with pytest.raises(wasm.MalformedSection):
        wasm.parse_module(data)


def test_out_of_order_sections_rejected():
    # memory section (5) then type section (1)
    data = EMPTY + bytes([0x05, 0x01, 0x00]) + bytes([0x01, 0x01, 0x00])
    with pytest.raises(wasm.MalformedSection):
        wasm.parse_module(data)


def test_custom_sections_skipped():
    # custom section with name "note" and some bytes, before and after type
    custom = bytes([0x00, 0x07, 0x04]) + b"note" + b"\x01\x02"
    data = EMPTY + custom + bytes([0x01, 0x01, 0x00]) + custom
    mod = wasm.parse_module(data)
    assert mod.types == []


def test_unknown_section_id_rejected():
    data = EMPTY + bytes([0x0D, 0x01, 0x00])
    with pytest.raises(wasm.MalformedSection):
        wasm.parse_module(data)


def _func_module(body: bytes, results: bytes = b"") -> bytes:
    """Minimal module with one () -> results function with the given body."""
    type_sec = bytes([0x01, 4 + len(results), 0x01, 0x60, 0x00,
                      len(results)]) + results
    func_sec = bytes([0x03, 0x02, 0x01, 0x00])
    code = bytes([0x00]) + body + bytes([0x0B])  # no locals
    code_sec = bytes([0x0A, len(code) + 2, 0x01, len(code)]) + code
    return EMPTY + type_sec + func_sec + code_sec


@pytest.mark.parametrize("body,feature", [
    (bytes([0xFD, 0x00]), "simd"),
    (bytes([0xFE, 0x00]), "threads"),
    (bytes([0xFC, 0x08]), "bulk-memory"),   # memory.init
    (bytes([0xFC, 0x0C]), "reference-types"),  # table.init
    (bytes([0xD0, 0x70]), "reference-types"),  # ref.null
    (bytes([0x12, 0x00]), "tail-calls"),    # return_call
    (bytes([0x06, 0x40]), "exceptions"),    # try
    (bytes([0x1C]), "reference-types"),     # select with types
])
def test_unsupported_opcodes(body, feature):
    with pytest.raises(wasm.UnsupportedFeature) as exc:
        wasm.parse_module(_func_module(body))
    assert exc.value.feature == feature


def test_multi_value_functype_rejected():
    with pytest.raises(wasm.UnsupportedFeature) as exc:
        wasm.parse_module(_func_module(b"", results=bytes([0x7F, 0x7F])))
    assert exc.value.feature == "multi-value"


def test_multi_value_blocktype_rejected():
    # block with S33 type-index blocktype (byte 0x00 = type index 0)
    with pytest.raises(wasm.UnsupportedFeature) as exc:
        wasm.parse_module(_func_module(bytes([0x02, 0x00, 0x0B])))
    assert exc.value.feature == "multi-value"


def test_datacount_section_rejected():
    data = EMPTY + bytes([0x0C, 0x01, 0x00])
    with pytest.raises(wasm.UnsupportedFeature) as exc:
        wasm.parse_module(data)
    assert exc.value.feature == "bulk-memory"


def test_passive_data_segment_rejected():
    # data section with flag 1 (passive)
    data = EMPTY + bytes([0x05, 0x03, 0x01, 0x00, 0x01])  # memory, min 1
    data += bytes([0x0B, 0x04, 0x01, 0x01, 0x01, 0xAA])
    with pytest.raises(wasm.UnsupportedFeature) as exc:
        wasm.parse_module(data)
    assert exc.value.feature == "bulk-memory"


def test_shared_memory_rejected():
    data = EMPTY + bytes([0x05, 0x04, 0x01, 0x03, 0x01, 0x01])
    with pytest.raises(wasm.UnsupportedFeature) as exc:
        wasm.parse_module(data)
    assert exc.value.feature == "threads"


def test_func_decl_body_count_mismatch():
    type_sec = bytes([0x01, 0x04, 0x01, 0x60, 0x00, 0x00])
    func_sec = bytes([0x03, 0x02, 0x01, 0x00])  # one declared, zero bodies
    with pytest.raises(wasm.MalformedSection):
        wasm.parse_module(EMPTY + type_sec + func_sec)


def test_code_body_size_mismatch():
    type_sec = bytes([0x01, 0x04, 0x01, 0x60, 0x00, 0x00])
    func_sec = bytes([0x03, 0x02, 0x01, 0x00])
    # body claims 5 bytes but the expression ends after 2
    code_sec = bytes([0x0A, 0x07, 0x01, 0x05, 0x00, 0x0B, 0x01, 0x01, 0x01])
    with pytest.raises(wasm.MalformedSection):
        wasm.parse_module(EMPTY + type_sec + func_sec + code_sec)


def test_huge_leb_rejected():
    # section size as a 6-byte LEB (too long for u32)
    data = EMPTY + bytes([0x01, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0x7F])
    with pytest.raises(wasm.MalformedSection):
        wasm.parse_module(data)


def test_parse_reports_offset():
    data = EMPTY + bytes([0x01, 0x64])
    with pytest.raises(wasm.MalformedSection) as exc:
        wasm.parse_module(data)
    assert exc.value.section_id == 1
    assert exc.value.offset >= 8
