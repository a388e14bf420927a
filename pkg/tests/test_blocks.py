import pytest

from custodysim.blocks import (Block, Mempool, block_digest, block_gas,
                               block_size, build_block, genesis_digest)
from custodysim.ledger import Address, EvidenceId, transfer_tx, create_tx


def _transfer(uid):
    return transfer_tx(uid, Address.from_int(uid), EvidenceId.from_int(uid),
                       Address.from_int(uid + 1), float(uid))


@pytest.fixture
def mempool():
    return Mempool()


class TestMempool:
    def test_fifo_order(self, mempool):
        txs = [_transfer(i) for i in range(1, 11)]
        for tx in txs:
            mempool.submit(tx)
        assert [t.uid for t in mempool.pending] == list(range(1, 11))

    def test_duplicate_submit_ignored(self, mempool):
        tx = _transfer(1)
        mempool.submit(tx)
        mempool.submit(tx)
        assert len(mempool) == 1

    def test_removal_only_for_committed(self, mempool):
        for i in range(1, 4):
            mempool.submit(_transfer(i))
        mempool.remove_committed([2])
        assert [t.uid for t in mempool.pending] == [1, 3]


class TestBuildBlock:
    def test_gas_limit_cuts_fifo(self, mempool):
        for i in range(1, 4):
            mempool.submit(_transfer(i))
        # 2 * 80502 = 161004 <= 170207 < 3 * 80502
        block = build_block(mempool, 170207, 0, genesis_digest(), 0, 0.0)
        assert [t.uid for t in block.transactions] == [1, 2]
        assert block_gas(block) <= 170207
        assert len(mempool) == 3  # building does not consume

    def test_empty_mempool_gives_header_only_block(self, mempool):
        block = build_block(mempool, 10 ** 6, 0, genesis_digest(), 0, 0.0)
        assert block.transactions == ()
        assert block_size(block) == 1909

    def test_oversized_head_blocks_queue(self, mempool):
        big = create_tx(1, Address.from_int(1), EvidenceId.from_int(1),
                        "x" * 1024, 0.0)
        assert big.gas == 897367
        mempool.submit(big)
        mempool.submit(_transfer(2))
        block = build_block(mempool, 170207, 0, genesis_digest(), 0, 0.0)
        assert block.transactions == ()  # strict FIFO: no gap filling
        assert mempool.stuck_head(170207) is big

    def test_timestamp_is_period_start(self, mempool):
        block = build_block(mempool, 0, 5, genesis_digest(), 2, 1500.0)
        assert block.timestamp == 1500.0


class TestBlockSize:
    def test_two_transfers(self):
        block = Block(0, genesis_digest(), 0, 0.0,
                      (_transfer(1), _transfer(2)))
        assert block_size(block) == 1909 + 348 == 2257

    def test_one_full_create(self):
        tx = create_tx(1, Address.from_int(1), EvidenceId.from_int(1),
                       "x" * 1024, 0.0)
        assert block_size(Block(0, genesis_digest(), 0, 0.0, (tx,))) == 3142


class TestDigest:
    def test_deterministic(self):
        a = Block(1, genesis_digest(), 0, 5.0, (_transfer(1),))
        b = Block(1, genesis_digest(), 0, 5.0, (_transfer(1),))
        assert block_digest(a) == block_digest(b)

    def test_salt_changes_digest(self):
        a = Block(1, genesis_digest(), 0, 5.0)
        b = Block(1, genesis_digest(), 0, 5.0, salt=1)
        assert block_digest(a) != block_digest(b)

    def test_contents_change_digest(self):
        a = Block(1, genesis_digest(), 0, 5.0)
        b = Block(1, genesis_digest(), 0, 5.0, (_transfer(1),))
        c = Block(2, genesis_digest(), 0, 5.0)
        assert len({block_digest(x) for x in (a, b, c)}) == 3
