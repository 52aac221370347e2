use serde::{Deserialize, Serialize};

/// How the flat network output is split into `heads x actions`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadLayout {
    pub heads: usize,
    pub actions: usize,
}

impl HeadLayout {
    pub fn outputs(&self) -> usize {
        self.heads * self.actions
    }

    #[inline]
    pub fn index(&self, head: usize, action: usize) -> usize {
        head * self.actions + action
    }
}
