use std::collections::HashMap;
use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

/// 48-bit link-layer address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MacAddr(pub [u8; 6]);

impl MacAddr {
    pub const ZERO: MacAddr = MacAddr([0; 6]);
    pub const BROADCAST: MacAddr = MacAddr([0xff; 6]);

    pub fn from_u64(value: u64) -> Self {
        let b = value.to_be_bytes();
        MacAddr([b[2], b[3], b[4], b[5], b[6], b[7]])
    }
}

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            b[0], b[1], b[2], b[3], b[4], b[5]
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseMacError(pub String);

impl fmt::Display for ParseMacError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid MAC address `{}`", self.0)
    }
}

impl std::error::Error for ParseMacError {}

impl FromStr for MacAddr {
    type Err = ParseMacError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [0u8; 6];
        let mut parts = s.split(':');
        for byte in out.iter_mut() {
            let part = parts.next().ok_or_else(|| ParseMacError(s.to_owned()))?;
            if part.len() != 2 {
                return Err(ParseMacError(s.to_owned()));
            }
            *byte = u8::from_str_radix(part, 16).map_err(|_| ParseMacError(s.to_owned()))?;
        }
        if parts.next().is_some() {
            return Err(ParseMacError(s.to_owned()));
        }
        Ok(MacAddr(out))
    }
}

/// Legitimate IP/MAC binding of every node for one run.
///
/// Node `i` owns `10.0.0.0 + (i + 1)` and the locally administered MAC
/// `02:00:00:00:00:00 + (i + 1)`, so both columns are injective.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthTable {
    bindings: Vec<(Ipv4Addr, MacAddr)>,
    by_ip: HashMap<Ipv4Addr, usize>,
}

impl GroundTruthTable {
    pub fn for_nodes(node_count: usize) -> Self {
        let bindings: Vec<_> = (0..node_count)
            .map(|i| {
                let host = i as u32 + 1;
                let ip = Ipv4Addr::from(u32::from(Ipv4Addr::new(10, 0, 0, 0)) + host);
                let mac = MacAddr::from_u64(0x0200_0000_0000 + host as u64);
                (ip, mac)
            })
            .collect();
        let by_ip = bindings.iter().enumerate().map(|(i, (ip, _))| (*ip, i)).collect();
        Self { bindings, by_ip }
    }

    pub fn node_count(&self) -> usize {
        self.bindings.len()
    }

    pub fn ip(&self, node: usize) -> Ipv4Addr {
        self.bindings[node].0
    }

    pub fn mac(&self, node: usize) -> MacAddr {
        self.bindings[node].1
    }

    pub fn node_of_ip(&self, ip: Ipv4Addr) -> Option<usize> {
        self.by_ip.get(&ip).copied()
    }

    /// Whether `mac` is the legitimate owner of `ip`. Unknown IPs are never
    /// legitimately bound.
    pub fn is_legitimate(&self, ip: Ipv4Addr, mac: MacAddr) -> bool {
        self.node_of_ip(ip).map(|n| self.mac(n) == mac).unwrap_or(false)
    }
}
