use crate::rpl::DioMessage;
use crate::NodeId;

/// Link-layer destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Peer {
    Broadcast,
    Node(NodeId),
}

impl Peer {
    pub fn node(self) -> Option<NodeId> {
        match self {
            Peer::Node(n) => Some(n),
            Peer::Broadcast => None,
        }
    }
}

/// TSCH enhanced beacon. Only joined nodes send them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnhancedBeacon {
    pub sender: NodeId,
    pub asn: u64,
    /// Hop distance to the root.
    pub join_metric: u16,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Beacon(EnhancedBeacon),
    Dio(DioMessage),
    /// DODAG information solicitation from a node without a route.
    Dis,
    Data {
        origin: NodeId,
        seq: u32,
    },
}

impl Payload {
    pub fn kind(&self) -> FrameKind {
        match self {
            Payload::Beacon(_) => FrameKind::Beacon,
            Payload::Dio(_) => FrameKind::Dio,
            Payload::Dis => FrameKind::Dis,
            Payload::Data { .. } => FrameKind::Data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FrameKind {
    Beacon,
    Dio,
    Dis,
    Data,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    /// Per-node monotonically increasing id; lower means older.
    pub id: u64,
    pub src: NodeId,
    pub dest: Peer,
    pub payload: Payload,
}

impl Frame {
    pub fn needs_ack(&self) -> bool {
        matches!(self.dest, Peer::Node(_))
    }
}
