# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-algorithm simulation loops.

Each ``run_*`` function reproduces the corresponding node program of
``beepsim.algorithms`` driven by ``beepsim.engine.run``: same per-node
SplitMix64 streams, same draw order, same observations.  With ``k > 0``
the observations are those synthesised by the fixed-sequence BL
emulation with the packed sequences in ``seqs``.
"""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t, int32_t, uint8_t, int8_t

from beepsim.engine import InvariantViolation

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL

# observation codes
DEF SILENT = 0
DEF ONE = 1
DEF TWO_PLUS = 2
DEF ALONE = 3
DEF COLLIDED = 4
DEF NONE = -1


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t next_u64(uint64_t* st) noexcept nogil:
    st[0] += GOLDEN
    return mix64(st[0])


cdef inline uint64_t origin(uint64_t seed, uint64_t index) noexcept nogil:
    return mix64(mix64(seed) + (index + 1) * GOLDEN)


cdef inline bint bern_dyadic(uint64_t* st, int e) noexcept nogil:
    cdef int rem = e
    cdef int take
    cdef uint64_t u
    while rem > 0:
        u = next_u64(st)
        take = 64 if rem >= 64 else rem
        if take == 64:
            if u != 0:
                return 0
        elif (u >> (64 - take)) != 0:
            return 0
        rem -= take
    return 1


cdef inline bint bern_inverse(uint64_t* st, uint64_t m) noexcept nogil:
    cdef uint64_t rem, limit, u
    if m <= 1:
        return 1
    rem = (<uint64_t>0 - m) % m
    limit = <uint64_t>0 - rem
    while True:
        u = next_u64(st)
        if rem == 0 or u < limit:
            return u % m == 0


cdef inline int update(int e, bint activity) noexcept nogil:
    if activity:
        return e + 1
    return e - 1 if e > 1 else 1


def stream_origins(uint64_t seed, Py_ssize_t n):
    out = np.empty(n, dtype=np.uint64)
    cdef uint64_t[::1] o = out
    cdef Py_ssize_t v
    for v in range(n):
        o[v] = origin(seed, v)
    return out


def packed_sequences(uint64_t sequence_seed, Py_ssize_t n, int k):
    """Bit i of entry v is sub-phase i of node v's sequence (k <= 64)."""
    if not 1 <= k <= 64:
        raise ValueError("packed sequences need 1 <= k <= 64")
    out = np.empty(n, dtype=np.uint64)
    cdef uint64_t[::1] o = out
    cdef uint64_t st, acc
    cdef Py_ssize_t v
    cdef int i
    for v in range(n):
        st = origin(sequence_seed, v)
        acc = 0
        for i in range(k):
            if next_u64(&st) >> 63:
                acc |= (<uint64_t>1) << i
        o[v] = acc
    return out


cdef class Net:
    """Topology plus per-slot scratch buffers."""

    cdef Py_ssize_t n
    cdef const int32_t[::1] indptr
    cdef const int32_t[::1] indices
    cdef int32_t[::1] cnt
    cdef uint64_t[::1] first
    cdef uint8_t[::1] mixed
    cdef const uint64_t[::1] seq
    cdef bint emul
    cdef uint8_t[::1] beep
    cdef int8_t[::1] obs
    cdef int32_t[::1] beepers
    cdef uint64_t[::1] st

    def __init__(self, indptr, indices, uint64_t seed, seqs):
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int32)
        self.indices = np.ascontiguousarray(indices, dtype=np.int32)
        self.n = self.indptr.shape[0] - 1
        n = self.n
        self.cnt = np.zeros(n, dtype=np.int32)
        self.first = np.zeros(n, dtype=np.uint64)
        self.mixed = np.zeros(n, dtype=np.uint8)
        self.emul = seqs is not None
        if self.emul:
            self.seq = np.ascontiguousarray(seqs, dtype=np.uint64)
        else:
            self.seq = np.zeros(n, dtype=np.uint64)
        self.beep = np.zeros(n, dtype=np.uint8)
        self.obs = np.zeros(n, dtype=np.int8)
        self.beepers = np.zeros(n, dtype=np.int32)
        self.st = stream_origins(seed, n)

    cdef void slot(self) noexcept nogil:
        # raw pointers let the compiler keep the hot edge loop in registers
        cdef Py_ssize_t n = self.n
        cdef Py_ssize_t v, e, nb = 0, b
        cdef int32_t w, c
        cdef uint64_t s
        cdef const int32_t* ip = &self.indptr[0]
        cdef const int32_t* ix = &self.indices[0] if self.indices.shape[0] > 0 else NULL
        cdef int32_t* cnt = &self.cnt[0]
        cdef uint64_t* first = &self.first[0]
        cdef uint8_t* mixed = &self.mixed[0]
        cdef const uint64_t* seq = &self.seq[0]
        cdef uint8_t* beep = &self.beep[0]
        cdef int8_t* obs = &self.obs[0]
        cdef int32_t* beepers = &self.beepers[0]
        cdef bint emul = self.emul
        for v in range(n):
            if beep[v]:
                beepers[nb] = <int32_t>v
                nb += 1
        if emul:
            for b in range(nb):
                v = beepers[b]
                s = seq[v]
                for e in range(ip[v], ip[v + 1]):
                    w = ix[e]
                    c = cnt[w]
                    if c == 0:
                        first[w] = s
                    elif first[w] != s:
                        mixed[w] = 1
                    cnt[w] = c + 1
        else:
            for b in range(nb):
                v = beepers[b]
                for e in range(ip[v], ip[v + 1]):
                    cnt[ix[e]] += 1
        for v in range(n):
            c = cnt[v]
            if beep[v]:
                if c == 0:
                    obs[v] = ALONE
                elif not emul:
                    obs[v] = COLLIDED
                elif mixed[v] or first[v] != seq[v]:
                    obs[v] = COLLIDED
                else:
                    obs[v] = ALONE
            elif c == 0:
                obs[v] = SILENT
            elif emul:
                obs[v] = TWO_PLUS if mixed[v] else ONE
            else:
                obs[v] = ONE if c == 1 else TWO_PLUS
        for b in range(nb):
            v = beepers[b]
            for e in range(ip[v], ip[v + 1]):
                w = ix[e]
                cnt[w] = 0
                mixed[w] = 0


cdef inline bint heard(int8_t o) noexcept nogil:
    return o == ONE or o == TWO_PLUS


def _result(phases, native_slots, factor, out, dslot, aborted):
    return phases, native_slots * factor, out, dslot, aborted


def run_colouring(indptr, indices, uint64_t seed, int64_t max_slots, seqs=None, int k=0):
    cdef Net net = Net(indptr, indices, seed, seqs)
    cdef Py_ssize_t n = net.n, v
    cdef int64_t factor = 2 * k if seqs is not None else 1
    out_a = np.full(n, -1, dtype=np.int64)
    ds_a = np.full(n, -1, dtype=np.int64)
    cdef int64_t[::1] colour = out_a
    cdef int64_t[::1] dslot = ds_a
    cdef int32_t[::1] e = np.ones(n, dtype=np.int32)
    cdef int64_t[::1] counter = np.zeros(n, dtype=np.int64)
    cdef uint8_t[::1] live = np.ones(n, dtype=np.uint8)
    cdef int64_t slots = 0, phases = 0
    cdef Py_ssize_t undecided = n
    cdef bint aborted = 0
    with nogil:
        while undecided > 0:
            if (slots + 1) * factor > max_slots:
                aborted = 1
                break
            for v in range(n):
                net.beep[v] = live[v] and bern_dyadic(&net.st[v], e[v])
            net.slot()
            for v in range(n):
                if not live[v]:
                    continue
                if net.obs[v] == ALONE:
                    colour[v] = counter[v]
                    live[v] = 0
                    undecided -= 1
                    dslot[v] = slots * factor + factor - 1
                else:
                    e[v] = update(e[v], net.obs[v] != SILENT)
                    counter[v] += 1
            slots += 1
            phases += 1
    return _result(phases, slots, factor, out_a, ds_a, aborted)


def run_k_colouring(indptr, indices, uint64_t seed, int64_t max_slots, int K, bint cycle_variant,
                    seqs=None, int k=0):
    cdef Net net = Net(indptr, indices, seed, seqs)
    cdef Py_ssize_t n = net.n, v
    cdef int64_t factor = 2 * k if seqs is not None else 1
    cdef int palette = K + 1
    out_a = np.full(n, -1, dtype=np.int64)
    ds_a = np.full(n, -1, dtype=np.int64)
    cdef int64_t[::1] colour = out_a
    cdef int64_t[::1] dslot = ds_a
    cdef int32_t[::1] e = np.ones(n, dtype=np.int32)
    cdef int32_t[::1] counter = np.zeros(n, dtype=np.int32)
    cdef uint8_t[:, ::1] avail = np.ones((n, palette), dtype=np.uint8)
    cdef int32_t[::1] avail_count = np.full(n, palette, dtype=np.int32)
    cdef uint64_t[::1] denom = np.full(n, 2 * palette, dtype=np.uint64)
    cdef uint8_t[::1] active = np.zeros(n, dtype=np.uint8)
    cdef uint8_t[::1] beeped = np.zeros(n, dtype=np.uint8)
    cdef int8_t[::1] first = np.zeros(n, dtype=np.int8)
    cdef uint8_t[::1] live = np.ones(n, dtype=np.uint8)
    cdef int64_t slots = 0, phases = 0
    cdef Py_ssize_t undecided = n
    cdef bint aborted = 0, exhausted = 0
    with nogil:
        while undecided > 0:
            if (slots + 2) * factor > max_slots:
                aborted = 1
                break
            for v in range(n):
                if not live[v]:
                    net.beep[v] = 0
                    continue
                if cycle_variant and counter[v] == 0:
                    denom[v] = 2 * avail_count[v]
                active[v] = avail[v, counter[v]]
                if active[v]:
                    if cycle_variant:
                        beeped[v] = bern_inverse(&net.st[v], denom[v])
                    else:
                        beeped[v] = bern_dyadic(&net.st[v], e[v])
                else:
                    beeped[v] = 0
                net.beep[v] = beeped[v]
            net.slot()
            for v in range(n):
                first[v] = net.obs[v]
                net.beep[v] = live[v] and beeped[v] and first[v] == ALONE
            net.slot()
            for v in range(n):
                if not live[v]:
                    continue
                if beeped[v] and first[v] == ALONE:
                    colour[v] = counter[v]
                    live[v] = 0
                    undecided -= 1
                    dslot[v] = (slots + 1) * factor + factor - 1
                    continue
                if active[v] and not cycle_variant:
                    e[v] = update(e[v], first[v] != SILENT)
                if heard(net.obs[v]):
                    if avail[v, counter[v]]:
                        avail[v, counter[v]] = 0
                        avail_count[v] -= 1
                        if avail_count[v] == 0:
                            exhausted = 1
                counter[v] = (counter[v] + 1) % palette
            slots += 2
            phases += 1
            if exhausted:
                break
    if exhausted:
        raise InvariantViolation(f"palette of {palette} colours exhausted; K is below the maximum degree")
    return _result(phases, slots, factor, out_a, ds_a, aborted)


def run_two_hop_colouring(indptr, indices, uint64_t seed, int64_t max_slots, seqs=None, int k=0):
    cdef Net net = Net(indptr, indices, seed, seqs)
    cdef Py_ssize_t n = net.n, v
    cdef int64_t factor = 2 * k if seqs is not None else 1
    out_a = np.full(n, -1, dtype=np.int64)
    ds_a = np.full(n, -1, dtype=np.int64)
    cdef int64_t[::1] colour = out_a
    cdef int64_t[::1] dslot = ds_a
    cdef int32_t[::1] e = np.ones(n, dtype=np.int32)
    cdef int64_t[::1] counter = np.zeros(n, dtype=np.int64)
    cdef uint8_t[::1] beeped = np.zeros(n, dtype=np.uint8)
    cdef uint8_t[::1] alone = np.zeros(n, dtype=np.uint8)
    cdef int8_t[::1] heard0 = np.zeros(n, dtype=np.int8)
    cdef uint8_t[::1] live = np.ones(n, dtype=np.uint8)
    cdef int64_t slots = 0, phases = 0
    cdef Py_ssize_t remaining = n
    cdef bint aborted = 0
    with nogil:
        while remaining > 0:
            if (slots + 4) * factor > max_slots:
                aborted = 1
                break
            # slot 0: contend
            for v in range(n):
                beeped[v] = live[v] and colour[v] < 0 and bern_dyadic(&net.st[v], e[v])
                net.beep[v] = beeped[v]
            net.slot()
            for v in range(n):
                alone[v] = net.obs[v] == ALONE
                heard0[v] = NONE if beeped[v] else net.obs[v]
                net.beep[v] = live[v] and heard0[v] == TWO_PLUS
            # slot 1: peripheral collision reports
            net.slot()
            for v in range(n):
                if live[v] and alone[v] and net.obs[v] == SILENT:
                    colour[v] = counter[v]
                    dslot[v] = (slots + 1) * factor + factor - 1
                net.beep[v] = live[v] and not beeped[v] and heard0[v] != SILENT
            # slot 2: relay and adapt
            net.slot()
            for v in range(n):
                if live[v] and colour[v] < 0:
                    e[v] = update(e[v], beeped[v] or heard0[v] != SILENT or heard(net.obs[v]))
                net.beep[v] = live[v] and colour[v] < 0
            # slot 3: termination
            net.slot()
            for v in range(n):
                if not live[v]:
                    continue
                if colour[v] >= 0 and net.obs[v] == SILENT:
                    live[v] = 0
                    remaining -= 1
                counter[v] += 1
            slots += 4
            phases += 1
    return _result(phases, slots, factor, out_a, ds_a, aborted)


def run_degree(indptr, indices, uint64_t seed, int64_t max_slots, seqs=None, int k=0):
    cdef Net net = Net(indptr, indices, seed, seqs)
    cdef Py_ssize_t n = net.n, v
    cdef int64_t factor = 2 * k if seqs is not None else 1
    out_a = np.full(n, -1, dtype=np.int64)
    ds_a = np.full(n, -1, dtype=np.int64)
    cdef int64_t[::1] result = out_a
    cdef int64_t[::1] dslot = ds_a
    cdef int32_t[::1] e = np.ones(n, dtype=np.int32)
    cdef int64_t[::1] count = np.zeros(n, dtype=np.int64)
    cdef uint8_t[::1] counted = np.zeros(n, dtype=np.uint8)
    cdef uint8_t[::1] confirm = np.zeros(n, dtype=np.uint8)
    cdef uint8_t[::1] beeped = np.zeros(n, dtype=np.uint8)
    cdef uint8_t[::1] alone = np.zeros(n, dtype=np.uint8)
    cdef int8_t[::1] heard0 = np.zeros(n, dtype=np.int8)
    cdef uint8_t[::1] live = np.ones(n, dtype=np.uint8)
    cdef int64_t slots = 0, phases = 0
    cdef Py_ssize_t remaining = n
    cdef bint aborted = 0
    with nogil:
        while remaining > 0:
            if (slots + 5) * factor > max_slots:
                aborted = 1
                break
            for v in range(n):
                confirm[v] = 0
                beeped[v] = live[v] and not counted[v] and bern_dyadic(&net.st[v], e[v])
                net.beep[v] = beeped[v]
            net.slot()
            for v in range(n):
                alone[v] = net.obs[v] == ALONE
                heard0[v] = NONE if beeped[v] else net.obs[v]
                net.beep[v] = live[v] and heard0[v] == TWO_PLUS
            net.slot()
            for v in range(n):
                if live[v] and alone[v] and net.obs[v] == SILENT:
                    confirm[v] = 1
                    counted[v] = 1
                net.beep[v] = live[v] and confirm[v]
            net.slot()
            for v in range(n):
                if live[v] and heard(net.obs[v]):
                    count[v] += 1
                net.beep[v] = live[v] and not beeped[v] and heard0[v] != SILENT
            net.slot()
            for v in range(n):
                if live[v] and not counted[v]:
                    e[v] = update(e[v], beeped[v] or heard0[v] != SILENT or heard(net.obs[v]))
                net.beep[v] = live[v] and not counted[v]
            net.slot()
            for v in range(n):
                if live[v] and counted[v] and net.obs[v] == SILENT:
                    result[v] = count[v]
                    live[v] = 0
                    remaining -= 1
                    dslot[v] = (slots + 4) * factor + factor - 1
            slots += 5
            phases += 1
    return _result(phases, slots, factor, out_a, ds_a, aborted)


def run_mis(indptr, indices, uint64_t seed, int64_t max_slots, seqs=None, int k=0):
    cdef Net net = Net(indptr, indices, seed, seqs)
    cdef Py_ssize_t n = net.n, v
    cdef int64_t factor = 2 * k if seqs is not None else 1
    out_a = np.full(n, -1, dtype=np.int64)
    ds_a = np.full(n, -1, dtype=np.int64)
    cdef int64_t[::1] status = out_a
    cdef int64_t[::1] dslot = ds_a
    cdef int32_t[::1] e = np.ones(n, dtype=np.int32)
    cdef uint8_t[::1] beeped = np.zeros(n, dtype=np.uint8)
    cdef int8_t[::1] first = np.zeros(n, dtype=np.int8)
    cdef uint8_t[::1] live = np.ones(n, dtype=np.uint8)
    cdef int64_t slots = 0, phases = 0
    cdef Py_ssize_t undecided = n
    cdef bint aborted = 0
    with nogil:
        while undecided > 0:
            if (slots + 2) * factor > max_slots:
                aborted = 1
                break
            for v in range(n):
                beeped[v] = live[v] and bern_dyadic(&net.st[v], e[v])
                net.beep[v] = beeped[v]
            net.slot()
            for v in range(n):
                first[v] = net.obs[v]
                net.beep[v] = live[v] and beeped[v] and first[v] == ALONE
            net.slot()
            for v in range(n):
                if not live[v]:
                    continue
                if beeped[v] and first[v] == ALONE:
                    status[v] = 1
                elif heard(net.obs[v]):
                    status[v] = 0
                if status[v] >= 0:
                    live[v] = 0
                    undecided -= 1
                    dslot[v] = (slots + 1) * factor + factor - 1
                else:
                    e[v] = update(e[v], first[v] != SILENT)
            slots += 2
            phases += 1
    return _result(phases, slots, factor, out_a, ds_a, aborted)


def run_two_hop_mis(indptr, indices, uint64_t seed, int64_t max_slots, seqs=None, int k=0):
    cdef Net net = Net(indptr, indices, seed, seqs)
    cdef Py_ssize_t n = net.n, v
    cdef int64_t factor = 2 * k if seqs is not None else 1
    out_a = np.full(n, -1, dtype=np.int64)
    ds_a = np.full(n, -1, dtype=np.int64)
    cdef int64_t[::1] status = out_a
    cdef int64_t[::1] dslot = ds_a
    cdef int32_t[::1] e = np.ones(n, dtype=np.int32)
    cdef uint8_t[::1] beeped = np.zeros(n, dtype=np.uint8)
    cdef uint8_t[::1] alone = np.zeros(n, dtype=np.uint8)
    cdef uint8_t[::1] join = np.zeros(n, dtype=np.uint8)
    cdef uint8_t[::1] relay = np.zeros(n, dtype=np.uint8)
    cdef int8_t[::1] heard0 = np.zeros(n, dtype=np.int8)
    cdef int64_t slots = 0, phases = 0
    cdef Py_ssize_t undecided = n
    cdef bint aborted = 0
    with nogil:
        while undecided > 0:
            if (slots + 4) * factor > max_slots:
                aborted = 1
                break
            for v in range(n):
                relay[v] = 0
                join[v] = 0
                beeped[v] = status[v] < 0 and bern_dyadic(&net.st[v], e[v])
                net.beep[v] = beeped[v]
            net.slot()
            for v in range(n):
                alone[v] = net.obs[v] == ALONE
                heard0[v] = NONE if beeped[v] else net.obs[v]
                net.beep[v] = heard0[v] == TWO_PLUS
            net.slot()
            for v in range(n):
                if status[v] < 0:
                    if alone[v] and net.obs[v] == SILENT:
                        join[v] = 1
                        status[v] = 1
                        undecided -= 1
                        dslot[v] = (slots + 1) * factor + factor - 1
                    else:
                        e[v] = update(e[v], beeped[v] or heard0[v] != SILENT or heard(net.obs[v]))
                net.beep[v] = join[v]
            net.slot()
            for v in range(n):
                if heard(net.obs[v]):
                    relay[v] = 1
                    if status[v] < 0:
                        status[v] = 0
                        undecided -= 1
                        dslot[v] = (slots + 2) * factor + factor - 1
                net.beep[v] = relay[v]
            net.slot()
            for v in range(n):
                if heard(net.obs[v]) and status[v] < 0:
                    status[v] = 0
                    undecided -= 1
                    dslot[v] = (slots + 3) * factor + factor - 1
            slots += 4
            phases += 1
    return _result(phases, slots, factor, out_a, ds_a, aborted)
