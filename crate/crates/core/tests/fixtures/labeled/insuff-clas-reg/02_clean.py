from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

q = QuantumRegister(4, "q")
c = ClassicalRegister(4, "c")
qc = QuantumCircuit(q, c)
for i in range(4):
    qc.h(q[i])
qc.measure(q, c)
