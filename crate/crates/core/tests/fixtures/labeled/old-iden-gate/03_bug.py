from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

qc = QuantumCircuit(3, 3)
for i in range(3):
    qc.h(i)
    qc.iden(i)  # expect: old-iden-gate
qc.measure([0, 1, 2], [0, 1, 2])
