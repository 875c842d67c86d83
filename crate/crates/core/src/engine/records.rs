//! Binary record layouts stored in DFS files.
//!
//! All integers are little endian; `adjacency` is a varint edge count
//! followed by `(target: u64, weight: scalar)` pairs.
//!
//! | record           | layout                                            |
//! |------------------|---------------------------------------------------|
//! | `VertexRecord`   | `id: u64, state, active: u8, adjacency`           |
//! | `StateRecord`    | `id: u64, state, active: u8`                      |
//! | `StructureRecord`| `id: u64, adjacency`                              |
//! | `ShuffleRecord`  | `key: u64, tag: u8` then tag 0: `state, active: u8, adjacency`; tag 1: `source: u64, payload` |

use crate::cluster::Envelope;
use crate::codec::{take, varint_len, CodecError, Wire};
use crate::graph::{Edge, VertexId};
use crate::scalar::Scalar;

impl<S: Scalar> Wire for Edge<S> {
    fn encode(&self, out: &mut Vec<u8>) {
        self.target.encode(out);
        self.weight.encode(out);
    }
    fn decode(input: &mut &[u8]) -> Result<Self, CodecError> {
        Ok(Edge {
            target: u64::decode(input)?,
            weight: S::decode(input)?,
        })
    }
    fn encoded_len(&self) -> usize {
        8 + S::WIDTH
    }
}

/// Serialized size of an adjacency list.
pub fn adjacency_bytes<S: Scalar>(edges: &[Edge<S>]) -> u64 {
    (varint_len(edges.len() as u64) + edges.len() * (8 + S::WIDTH)) as u64
}

/// Serialized size of a structure record (id plus adjacency).
pub fn structure_record_bytes<S: Scalar>(edges: &[Edge<S>]) -> u64 {
    8 + adjacency_bytes(edges)
}

/// The `ShuffleRecord::Message` encoding, without needing ownership of `m`.
pub(crate) fn encode_message<M: Wire>(m: &Envelope<M>, out: &mut Vec<u8>) {
    m.dest.encode(out);
    out.push(TAG_MESSAGE);
    m.source.encode(out);
    m.payload.encode(out);
}

fn encode_edges<S: Scalar>(edges: &[Edge<S>], out: &mut Vec<u8>) {
    crate::codec::put_varint(out, edges.len() as u64);
    for e in edges {
        e.encode(out);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VertexRecord<St, S> {
    pub id: VertexId,
    pub state: St,
    pub active: bool,
    pub edges: Vec<Edge<S>>,
}

impl<St: Wire, S: Scalar> Wire for VertexRecord<St, S> {
    fn encode(&self, out: &mut Vec<u8>) {
        self.id.encode(out);
        self.state.encode(out);
        self.active.encode(out);
        encode_edges(&self.edges, out);
    }
    fn decode(input: &mut &[u8]) -> Result<Self, CodecError> {
        Ok(Self {
            id: u64::decode(input)?,
            state: St::decode(input)?,
            active: bool::decode(input)?,
            edges: Vec::decode(input)?,
        })
    }
    fn encoded_len(&self) -> usize {
        8 + self.state.encoded_len() + 1 + adjacency_bytes(&self.edges) as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateRecord<St> {
    pub id: VertexId,
    pub state: St,
    pub active: bool,
}

impl<St: Wire> Wire for StateRecord<St> {
    fn encode(&self, out: &mut Vec<u8>) {
        self.id.encode(out);
        self.state.encode(out);
        self.active.encode(out);
    }
    fn decode(input: &mut &[u8]) -> Result<Self, CodecError> {
        Ok(Self {
            id: u64::decode(input)?,
            state: St::decode(input)?,
            active: bool::decode(input)?,
        })
    }
    fn encoded_len(&self) -> usize {
        8 + self.state.encoded_len() + 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructureRecord<S> {
    pub id: VertexId,
    pub edges: Vec<Edge<S>>,
}

impl<S: Scalar> Wire for StructureRecord<S> {
    fn encode(&self, out: &mut Vec<u8>) {
        self.id.encode(out);
        encode_edges(&self.edges, out);
    }
    fn decode(input: &mut &[u8]) -> Result<Self, CodecError> {
        Ok(Self {
            id: u64::decode(input)?,
            edges: Vec::decode(input)?,
        })
    }
    fn encoded_len(&self) -> usize {
        structure_record_bytes(&self.edges) as usize
    }
}

const TAG_VERTEX: u8 = 0;
const TAG_MESSAGE: u8 = 1;

/// A key-value pair moving from mappers to reducers.
#[derive(Clone, Debug, PartialEq)]
pub enum ShuffleRecord<St, S, M> {
    Vertex(VertexRecord<St, S>),
    Message(Envelope<M>),
}

impl<St, S, M> ShuffleRecord<St, S, M> {
    pub fn key(&self) -> VertexId {
        match self {
            ShuffleRecord::Vertex(v) => v.id,
            ShuffleRecord::Message(m) => m.dest,
        }
    }

    /// Merge order within a reducer: key, then the vertex record, then messages by source.
    pub fn sort_key(&self) -> (VertexId, u8, VertexId) {
        match self {
            ShuffleRecord::Vertex(v) => (v.id, TAG_VERTEX, 0),
            ShuffleRecord::Message(m) => (m.dest, TAG_MESSAGE, m.source),
        }
    }
}

impl<St: Wire, S: Scalar, M: Wire> Wire for ShuffleRecord<St, S, M> {
    fn encode(&self, out: &mut Vec<u8>) {
        match self {
            ShuffleRecord::Vertex(v) => {
                v.id.encode(out);
                out.push(TAG_VERTEX);
                v.state.encode(out);
                v.active.encode(out);
                encode_edges(&v.edges, out);
            }
            ShuffleRecord::Message(m) => encode_message(m, out),
        }
    }
    fn decode(input: &mut &[u8]) -> Result<Self, CodecError> {
        let key = u64::decode(input)?;
        match take(input, 1)?[0] {
            TAG_VERTEX => Ok(ShuffleRecord::Vertex(VertexRecord {
                id: key,
                state: St::decode(input)?,
                active: bool::decode(input)?,
                edges: Vec::decode(input)?,
            })),
            TAG_MESSAGE => Ok(ShuffleRecord::Message(Envelope {
                dest: key,
                source: u64::decode(input)?,
                payload: M::decode(input)?,
            })),
            tag => Err(CodecError::InvalidTag(tag)),
        }
    }
    fn encoded_len(&self) -> usize {
        match self {
            ShuffleRecord::Vertex(v) => v.encoded_len() + 1,
            ShuffleRecord::Message(m) => m.wire_len() + 1,
        }
    }
}
